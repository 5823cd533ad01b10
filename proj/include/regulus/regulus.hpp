#pragma once

#include "regulus/dataset.hpp"
#include "regulus/msc.hpp"
#include "regulus/tree.hpp"
#include "regulus/regression.hpp"
#include "regulus/measures.hpp"
#include "regulus/fitness.hpp"
#include "regulus/projection.hpp"
#include "regulus/analysis.hpp"
#include "regulus/export.hpp"
#include "regulus/synthetic.hpp"
