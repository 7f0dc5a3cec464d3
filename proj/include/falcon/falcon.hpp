#pragma once

#include "falcon/evalbench.hpp"
#include "falcon/extract.hpp"
#include "falcon/polarnet.hpp"
