#pragma once

#include "ksreg/canon.hpp"
#include "ksreg/dynamics.hpp"
#include "ksreg/errors.hpp"
#include "ksreg/invariants.hpp"
#include "ksreg/kepler.hpp"
#include "ksreg/ksmap.hpp"
#include "ksreg/linalg.hpp"
#include "ksreg/oscillator.hpp"
#include "ksreg/propagator.hpp"
#include "ksreg/quat.hpp"
#include "ksreg/rotframe.hpp"
