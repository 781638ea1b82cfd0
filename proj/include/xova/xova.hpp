#ifndef XOVA_XOVA_HPP
#define XOVA_XOVA_HPP

#include "xova/dataio.hpp"
#include "xova/diag.hpp"
#include "xova/init.hpp"
#include "xova/loss.hpp"
#include "xova/metrics.hpp"
#include "xova/model.hpp"
#include "xova/report.hpp"
#include "xova/solver.hpp"
#include "xova/sparse.hpp"
#include "xova/trainer.hpp"

#endif // XOVA_XOVA_HPP
