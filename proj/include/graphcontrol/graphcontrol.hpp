#pragma once

#include "graphcontrol/adapt.hpp"
#include "graphcontrol/cache.hpp"
#include "graphcontrol/checkpoint.hpp"
#include "graphcontrol/condition.hpp"
#include "graphcontrol/config.hpp"
#include "graphcontrol/dataset_io.hpp"
#include "graphcontrol/errors.hpp"
#include "graphcontrol/gradcheck.hpp"
#include "graphcontrol/graph.hpp"
#include "graphcontrol/nn.hpp"
#include "graphcontrol/optim.hpp"
#include "graphcontrol/parallel.hpp"
#include "graphcontrol/pretrain.hpp"
#include "graphcontrol/rng.hpp"
#include "graphcontrol/sampler.hpp"
#include "graphcontrol/spectral.hpp"
#include "graphcontrol/synthetic.hpp"
