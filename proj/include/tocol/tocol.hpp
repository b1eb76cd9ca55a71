#pragma once

#include "tocol/systems.hpp"
#include "tocol/transcription.hpp"
#include "tocol/solver.hpp"
#include "tocol/trajectory.hpp"
#include "tocol/mpc.hpp"
