#pragma once

#include "genmix/base64.hpp"
#include "genmix/compositor.hpp"
#include "genmix/edit_backend.hpp"
#include "genmix/errors.hpp"
#include "genmix/faithful_filter.hpp"
#include "genmix/fractal.hpp"
#include "genmix/hashing.hpp"
#include "genmix/image.hpp"
#include "genmix/image_io.hpp"
#include "genmix/manifest.hpp"
#include "genmix/mask.hpp"
#include "genmix/metrics.hpp"
#include "genmix/parallel.hpp"
#include "genmix/pipeline.hpp"
#include "genmix/prompts.hpp"
#include "genmix/random.hpp"
