#ifndef VPS_VPS_HPP
#define VPS_VPS_HPP

#include "vps/error.hpp"
#include "vps/physics.hpp"
#include "vps/tridiag.hpp"
#include "vps/transport1d.hpp"
#include "vps/optimizer.hpp"
#include "vps/schemes.hpp"
#include "vps/oracles.hpp"
#include "vps/metrics.hpp"
#include "vps/experiment.hpp"

#endif  // VPS_VPS_HPP
