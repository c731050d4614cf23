#pragma once

#include "hostcap/barrier.hpp"
#include "hostcap/capability.hpp"
#include "hostcap/common.hpp"
#include "hostcap/distflow.hpp"
#include "hostcap/feeder.hpp"
#include "hostcap/hosting.hpp"
#include "hostcap/io.hpp"
#include "hostcap/sensitivity.hpp"
#include "hostcap/validation.hpp"
