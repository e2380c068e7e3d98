#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "genmix/errors.hpp"
#include "genmix/random.hpp"

namespace genmix {

enum class PromptTask { in_domain, domain_adaptation };

inline constexpr std::string_view to_string(PromptTask task) {
    return task == PromptTask::in_domain ? "in_domain" : "domain_adaptation";
}

/// Accepts both the enum spelling and the CLI spelling ("in-domain").
inline PromptTask prompt_task_from_string(std::string_view name) {
    if (name == "in_domain" || name == "in-domain") return PromptTask::in_domain;
    if (name == "domain_adaptation" || name == "domain-adaptation") return PromptTask::domain_adaptation;
    throw DomainError("unknown prompt task '" + std::string(name) + "'");
}

class Prompt {
public:
    Prompt(std::string id, std::string text, PromptTask task)
        : id_(std::move(id)), text_(std::move(text)), task_(task) {
        if (id_.empty()) throw DomainError("prompt id must be non-empty");
        if (text_.empty()) throw DomainError("prompt '" + id_ + "' has empty text");
        if (text_.find_first_of("\r\n") != std::string::npos)
            throw DomainError("prompt '" + id_ + "' contains a newline");
    }

    const std::string& id() const noexcept { return id_; }
    const std::string& text() const noexcept { return text_; }
    PromptTask task() const noexcept { return task_; }

    friend bool operator==(const Prompt&, const Prompt&) = default;

private:
    std::string id_;
    std::string text_;
    PromptTask task_;
};

struct PromptSet {
    PromptTask task;
    std::vector<Prompt> prompts;
};

inline constexpr std::string_view instruction_template = "A transformed version of image into ";

/// Editing instruction handed to the image editor.
inline std::string expand_prompt(const Prompt& prompt) {
    return std::string(instruction_template) + prompt.text();
}

namespace detail {

inline std::string prompt_id_for(std::string_view text) {
    std::string id(text);
    for (char& c : id)
        if (c == ' ') c = '_';
    return id;
}

inline std::vector<Prompt> builtin_prompts() {
    std::vector<Prompt> out;
    for (std::string_view text : {"autumn", "snowy", "sunset", "watercolor art", "rainbow", "aurora", "mosaic",
                                  "ukiyo-e", "a sketch with crayon"})
        out.emplace_back(prompt_id_for(text), std::string(text), PromptTask::in_domain);
    for (std::string_view text :
         {"graffiti", "retro comic", "chalk drawing", "watercolor painting", "digital art", "cartoon style"})
        out.emplace_back(prompt_id_for(text), std::string(text), PromptTask::domain_adaptation);
    return out;
}

}  // namespace detail

/// Built-in prompt sets plus user extensions appended after them.
/// Built-ins cannot be removed or replaced.
class PromptLibrary {
public:
    PromptLibrary() : prompts_(detail::builtin_prompts()) {}

    void add(Prompt prompt) {
        for (const auto& p : prompts_)
            if (p.id() == prompt.id()) throw DomainError("duplicate prompt id '" + prompt.id() + "'");
        prompts_.push_back(std::move(prompt));
    }

    /// Append prompts from a JSON array of {id, text, task} objects.
    void extend_from_json(const nlohmann::json& list) {
        if (!list.is_array()) throw DomainError("prompts config must be an array");
        for (const auto& item : list) {
            try {
                add(Prompt(item.at("id").get<std::string>(), item.at("text").get<std::string>(),
                           prompt_task_from_string(item.at("task").get<std::string>())));
            } catch (const nlohmann::json::exception& e) {
                throw DomainError(std::string("invalid prompt entry: ") + e.what());
            }
        }
    }

    PromptSet list(PromptTask task) const {
        PromptSet set{task, {}};
        for (const auto& p : prompts_)
            if (p.task() == task) set.prompts.push_back(p);
        return set;
    }

    const Prompt* find(std::string_view id) const {
        for (const auto& p : prompts_)
            if (p.id() == id) return &p;
        return nullptr;
    }

    const std::vector<Prompt>& all() const noexcept { return prompts_; }

private:
    std::vector<Prompt> prompts_;
};

inline PromptSet list_prompts(PromptTask task) { return PromptLibrary().list(task); }

/// I.i.d. uniform draw.
inline const Prompt& sample_prompt(RngStream& rng, const PromptSet& set) {
    if (set.prompts.empty()) throw DomainError("cannot sample from an empty prompt set");
    return set.prompts[rng.uniform_index(set.prompts.size())];
}

}  // namespace genmix
