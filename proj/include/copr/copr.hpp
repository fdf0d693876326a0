#pragma once

#include "copr/error.hpp"
#include "copr/geometry.hpp"
#include "copr/rng.hpp"
#include "copr/vpr_map.hpp"
#include "copr/map_io.hpp"
#include "copr/neural/mlp.hpp"
#include "copr/neural/train.hpp"
#include "copr/neural/regressor.hpp"
#include "copr/neural/losses.hpp"
#include "copr/neural/encoder.hpp"
#include "copr/densify.hpp"
#include "copr/synth.hpp"
#include "copr/config_json.hpp"
#include "copr/scene_io.hpp"
#include "copr/eval.hpp"
#include "copr/benchmark.hpp"
