#pragma once

#include <srt/controller.hpp>
#include <srt/datasets.hpp>
#include <srt/models.hpp>
#include <srt/numerics.hpp>
#include <srt/telemetry.hpp>
#include <srt/theory.hpp>
#include <srt/trainer.hpp>
