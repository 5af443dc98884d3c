#pragma once

#include <srt/datasets/batches.hpp>
#include <srt/datasets/idx.hpp>
#include <srt/datasets/io.hpp>
#include <srt/datasets/labeled_dataset.hpp>
#include <srt/datasets/libsvm.hpp>
#include <srt/datasets/synthetic.hpp>
