// Umbrella header.
#pragma once

#include "ncpd/baselines.hpp"
#include "ncpd/common.hpp"
#include "ncpd/cooperation.hpp"
#include "ncpd/dataset.hpp"
#include "ncpd/disambiguation.hpp"
#include "ncpd/duplication.hpp"
#include "ncpd/evaluation.hpp"
#include "ncpd/mlp.hpp"
