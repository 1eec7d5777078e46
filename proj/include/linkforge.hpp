#pragma once

#include "linkforge/checkpoint.hpp"
#include "linkforge/cli.hpp"
#include "linkforge/config.hpp"
#include "linkforge/data_io.hpp"
#include "linkforge/error.hpp"
#include "linkforge/graph.hpp"
#include "linkforge/injection.hpp"
#include "linkforge/metrics.hpp"
#include "linkforge/models.hpp"
#include "linkforge/reports.hpp"
#include "linkforge/rng.hpp"
#include "linkforge/tensor.hpp"
#include "linkforge/training.hpp"
