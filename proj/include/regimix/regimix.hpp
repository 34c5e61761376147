#pragma once

#include <regimix/core.hpp>
#include <regimix/random.hpp>
#include <regimix/parallel.hpp>
#include <regimix/logistic_process.hpp>
#include <regimix/em_common.hpp>
#include <regimix/mixrhlp.hpp>
#include <regimix/baselines.hpp>
#include <regimix/discriminant.hpp>
#include <regimix/evaluation.hpp>
#include <regimix/datagen.hpp>
#include <regimix/io.hpp>
#include <regimix/serialization.hpp>
