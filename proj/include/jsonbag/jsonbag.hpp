#pragma once

#include "jsonbag/common.hpp"
#include "jsonbag/json_tokenizer.hpp"
#include "jsonbag/bag_model.hpp"
#include "jsonbag/distance_metrics.hpp"
#include "jsonbag/classifiers.hpp"
#include "jsonbag/random_forest.hpp"
#include "jsonbag/games/games.hpp"
#include "jsonbag/agents.hpp"
#include "jsonbag/experiments.hpp"
