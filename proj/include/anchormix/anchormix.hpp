// Convenience umbrella for the whole library.

#pragma once

#include "anchormix/cdw.hpp"
#include "anchormix/core.hpp"
#include "anchormix/em_anchor.hpp"
#include "anchormix/gibbs.hpp"
#include "anchormix/numerics.hpp"
