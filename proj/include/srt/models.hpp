#pragma once

#include <srt/models/checkpoint.hpp>
#include <srt/models/logistic.hpp>
#include <srt/models/mlp.hpp>
#include <srt/models/objective.hpp>
#include <srt/models/quadratic.hpp>
