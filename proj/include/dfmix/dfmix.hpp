#pragma once

#include "dfmix/error.hpp"
#include "dfmix/kernel.hpp"
#include "dfmix/grid.hpp"
#include "dfmix/vtk.hpp"
#include "dfmix/assembly.hpp"
#include "dfmix/stationary.hpp"
#include "dfmix/transient.hpp"
#include "dfmix/verify.hpp"
#include "dfmix/cli.hpp"
