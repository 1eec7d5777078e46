#pragma once

#include <gtest/gtest.h>

#include "oracles.hpp"

#define LF_EXPECT_GRADIENTS(f, params, tol)                              \
  do {                                                                   \
    const auto lf_bad = ::lf_test::gradient_check((f), (params), (tol)); \
    EXPECT_TRUE(lf_bad.empty()) << lf_bad.size() << " mismatches\n"      \
                                << ::lf_test::describe(lf_bad);          \
  } while (0)

// Composed losses (whole models) and single ops respectively.
#define EXPECT_GRADIENTS_MATCH(f, params) LF_EXPECT_GRADIENTS(f, params, ::lf_test::kFdRelTol)
#define EXPECT_OP_GRADIENTS_MATCH(f, params) LF_EXPECT_GRADIENTS(f, params, ::lf_test::kFdOpRelTol)
