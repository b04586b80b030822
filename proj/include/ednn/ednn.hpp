#pragma once

#include "ednn/adam.hpp"
#include "ednn/checkpoint.hpp"
#include "ednn/datagen.hpp"
#include "ednn/error.hpp"
#include "ednn/exact_sum.hpp"
#include "ednn/graph.hpp"
#include "ednn/heatmap.hpp"
#include "ednn/idx.hpp"
#include "ednn/image.hpp"
#include "ednn/image_io.hpp"
#include "ednn/kernels.hpp"
#include "ednn/model.hpp"
#include "ednn/parallel.hpp"
#include "ednn/resample.hpp"
#include "ednn/tensor.hpp"
#include "ednn/tiler.hpp"
#include "ednn/trainer.hpp"
