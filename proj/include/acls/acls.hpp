#ifndef ACLS_ACLS_HPP
#define ACLS_ACLS_HPP

#include "acls/numeric.hpp"
#include "acls/problem.hpp"
#include "acls/oracles.hpp"
#include "acls/algorithms.hpp"
#include "acls/operator_lab.hpp"
#include "acls/experiments.hpp"

#endif  // ACLS_ACLS_HPP
