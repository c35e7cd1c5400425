#pragma once

#include "invreg/bootstrap.hpp"
#include "invreg/candidate_matrix.hpp"
#include "invreg/core_data.hpp"
#include "invreg/cvm_tests.hpp"
#include "invreg/empirical_process.hpp"
#include "invreg/errors.hpp"
#include "invreg/io.hpp"
#include "invreg/parallel.hpp"
#include "invreg/rng.hpp"
#include "invreg/simulation.hpp"
#include "invreg/step_process.hpp"
