#pragma once

#include "aep.hpp"
#include "commoninfo.hpp"
#include "covering.hpp"
#include "embezzle.hpp"
#include "entropies.hpp"
#include "io.hpp"
#include "mutualinfo.hpp"
#include "state.hpp"
