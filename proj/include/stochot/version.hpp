#pragma once

#ifndef STOCHOT_VERSION
#define STOCHOT_VERSION "0.1.0"
#endif
