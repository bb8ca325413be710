#pragma once

#include "core_model.hpp"
#include "environments.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "policies.hpp"
#include "rng.hpp"
