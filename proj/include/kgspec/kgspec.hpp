#pragma once

// Everything except cli_io (which pulls in json and OpenSSL).

#include "kgspec/scalars.hpp"
#include "kgspec/numerics.hpp"
#include "kgspec/geometry.hpp"
#include "kgspec/extensions.hpp"
#include "kgspec/spectral.hpp"
#include "kgspec/classify.hpp"
#include "kgspec/evolution.hpp"
#include "kgspec/observables.hpp"
#include "kgspec/oracle_fd.hpp"
