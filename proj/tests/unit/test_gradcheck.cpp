// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "semsplat/gradcheck.hpp"

using namespace semsplat;

TEST(GradCheck, RelativeErrorFormula) {
    EXPECT_DOUBLE_EQ(gradcheck_relative_error(1.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(gradcheck_relative_error(2.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(gradcheck_relative_error(-1.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(gradcheck_relative_error(0.0, 1e-7), 0.1);
    EXPECT_DOUBLE_EQ(gradcheck_relative_error(0.0, 0.0), 0.0);
}

TEST(GradCheck, SummaryNeedsSamples) {
    GradCheckSummary s;
    s.tolerance = 1e-3;
    EXPECT_FALSE(s.passed());
    s.samples = 10;
    EXPECT_TRUE(s.passed());
    s.max_rel_error = 2e-3;
    EXPECT_FALSE(s.passed());
}

TEST(GradCheck, AllSuitesPassOnFewConfigs) {
    GradCheckOptions o;
    o.configs = 5;
    o.seed = 11;
    const auto suites = gradcheck_all(o);
    EXPECT_EQ(suites.size(), 6u);
    for (const GradCheckSummary& s : suites) {
        EXPECT_TRUE(s.passed()) << s.name << " max " << s.max_rel_error << " samples " << s.samples << " rejected "
                                << s.rejected;
        EXPECT_EQ(s.configs, 5);
        EXPECT_LE(s.tolerance, 1e-3);
    }
}
