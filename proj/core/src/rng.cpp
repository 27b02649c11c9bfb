#include "colabel/rng.hpp"
