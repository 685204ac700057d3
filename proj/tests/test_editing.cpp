// Editing-method tests. The central structural property: the direct
// difference-path integration telescopes step for step to the
// invert-then-regenerate endpoint, for any velocity backend. Everything
// noise-driven must also be replayable bit for bit from (seed, timestep,
// realization), with rows independent of the batch they ride in.

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include <doctest.h>

#include "flowlab/editing.hpp"
#include "flowlab/errors.hpp"
#include "flowlab/experiment.hpp"
#include "flowlab/gmm.hpp"
#include "flowlab/net.hpp"
#include "flowlab/rng.hpp"
#include "support.hpp"

using namespace flowlab;
using testsupport::BenchmarkFixture;
using testsupport::bitwise_equal;
using testsupport::max_abs_diff;
using testsupport::small_request;

namespace {

/// Random-ish three-vs-two-component pair to decouple the telescoping checks
/// from the stock benchmark geometry.
struct LopsidedFixture {
    GaussianMixture source;
    GaussianMixture target;
    ConditionedModel model;

    static GaussianMixture make_source() {
        Eigen::Matrix2d stretched;
        stretched << 1.5, 0.3, 0.3, 0.6;
        std::vector<GaussianComponent> comps(3);
        comps[0] = {0.5, Eigen::Vector2d(-4.0, 1.0), Eigen::Matrix2d::Identity()};
        comps[1] = {0.3, Eigen::Vector2d(3.0, 3.0), stretched};
        comps[2] = {0.2, Eigen::Vector2d(0.0, -5.0), Eigen::Matrix2d::Identity() * 0.5};
        return GaussianMixture(comps);
    }

    static GaussianMixture make_target() {
        std::vector<GaussianComponent> comps(2);
        comps[0] = {0.7, Eigen::Vector2d(6.0, -2.0), Eigen::Matrix2d::Identity()};
        comps[1] = {0.3, Eigen::Vector2d(-6.0, -2.0), Eigen::Matrix2d::Identity() * 2.0};
        return GaussianMixture(comps);
    }

    LopsidedFixture()
        : source(make_source()),
          target(make_target()),
          model(ConditionedModel::analytic(2)) {
        model.add_condition("src", source);
        model.add_condition("tar", target);
    }
};

EditRequest lopsided_request(const LopsidedFixture& fixture, int steps, int n_max) {
    EditRequest request;
    request.source_points = fixture.source.sample(32, 41);
    request.src_condition = "src";
    request.tar_condition = "tar";
    request.schedule =
        Schedule(Schedule::uniform(steps).timesteps(), n_max, 0, 1, 1.0);
    request.seed = 13;
    return request;
}

} // namespace

TEST_CASE("direct path telescopes to the inversion endpoint") {
    SUBCASE("stock benchmark, full depth") {
        const BenchmarkFixture fixture;
        const EditRequest request = small_request(fixture.config, 48, 50, 1, 7);
        const Batch inverted = invert_edit(fixture.model, request).edited_points;
        const Batch direct = direct_path_edit(fixture.model, request).edited_points;
        CHECK(max_abs_diff(inverted, direct) < 1e-9);
    }

    SUBCASE("lopsided mixtures, full and partial depth") {
        const LopsidedFixture fixture;
        for (const int n_max : {17, 9, 3}) {
            const EditRequest request = lopsided_request(fixture, 17, n_max);
            const Batch inverted = invert_edit(fixture.model, request).edited_points;
            const Batch direct = direct_path_edit(fixture.model, request).edited_points;
            CHECK(max_abs_diff(inverted, direct) < 1e-9);
        }
    }

    SUBCASE("learned backend") {
        // An arbitrary (untrained) network with a non-zero output head: the
        // telescoping identity is a property of the loop, not of the field.
        VelocityNet net = VelocityNet::initialized(2, 2, 5, {16, 16});
        net.layers().back().weight =
            0.05 * standard_normal_matrix(derive_key(6, rng_stream::scratch), 2,
                                          net.layers().back().weight.cols(), 0, 0);
        ConditionedModel model =
            ConditionedModel::learned(std::make_shared<const VelocityNet>(std::move(net)));
        model.add_condition("s", 0);
        model.add_condition("t", 1);

        EditRequest request;
        request.source_points = Batch::Random(20, 2) * 2.0;
        request.src_condition = "s";
        request.tar_condition = "t";
        request.schedule = Schedule(Schedule::uniform(10).timesteps(), 10, 0, 1, 1.0);
        const Batch inverted = invert_edit(model, request).edited_points;
        const Batch direct = direct_path_edit(model, request).edited_points;
        CHECK(max_abs_diff(inverted, direct) < 1e-10);
        // And the field genuinely moved the points (the head is non-zero).
        CHECK(max_abs_diff(inverted, request.source_points) > 1e-3);
    }
}

TEST_CASE("editing with identical conditions returns the source bit for bit") {
    const BenchmarkFixture fixture;
    EditRequest request = small_request(fixture.config);
    request.tar_condition = request.src_condition;
    const EditResult result = flowedit(fixture.model, request);
    CHECK(bitwise_equal(result.edited_points, request.source_points));
}

TEST_CASE("every method is a pure function of its request") {
    const BenchmarkFixture fixture;
    const EditRequest request = small_request(fixture.config);
    for (const char* method : {"flowedit", "invert", "direct", "sdedit"}) {
        const EditResult a = run_edit_method(fixture.model, method, request);
        const EditResult b = run_edit_method(fixture.model, method, request);
        CAPTURE(method);
        CHECK(bitwise_equal(a.edited_points, b.edited_points));
    }

    // Same request, different seed: the noise-driven methods move.
    EditRequest other = request;
    other.seed = request.seed + 1;
    CHECK_FALSE(bitwise_equal(flowedit(fixture.model, request).edited_points,
                              flowedit(fixture.model, other).edited_points));
    CHECK_FALSE(bitwise_equal(sdedit(fixture.model, request).edited_points,
                              sdedit(fixture.model, other).edited_points));
    // The deterministic ODE methods don't consume noise at all.
    CHECK(bitwise_equal(invert_edit(fixture.model, request).edited_points,
                        invert_edit(fixture.model, other).edited_points));
}

TEST_CASE("a row's edit does not depend on the rest of the batch") {
    // The noise streams are keyed by row index, so editing a prefix of the
    // batch reproduces the first rows of the full run exactly.
    const BenchmarkFixture fixture;
    const EditRequest full = small_request(fixture.config, 40, 12, 3, 5);
    EditRequest prefix = full;
    prefix.source_points = full.source_points.topRows(13);

    for (const char* method : {"flowedit", "invert", "direct", "sdedit"}) {
        const Batch whole = run_edit_method(fixture.model, method, full).edited_points;
        const Batch part = run_edit_method(fixture.model, method, prefix).edited_points;
        CAPTURE(method);
        CHECK(bitwise_equal(whole.topRows(13), part));
    }
}

TEST_CASE("replay metadata mirrors the request") {
    const BenchmarkFixture fixture;
    EditRequest request = small_request(fixture.config);
    request.schedule = Schedule(Schedule::uniform(12).timesteps(), 10, 2, 3, 0.9);
    request.seed = 77;

    const EditResult result = flowedit(fixture.model, request);
    CHECK(result.replay.method == "flowedit");
    CHECK(result.replay.seed == 77);
    CHECK(result.replay.n_max == 10);
    CHECK(result.replay.n_min == 2);
    CHECK(result.replay.n_avg == 3);
    CHECK(result.replay.step_scale_c == 0.9);
    CHECK(result.replay.shared_noise == true);

    CHECK(invert_edit(fixture.model, request).replay.method == "invert");
    CHECK(direct_path_edit(fixture.model, request).replay.method == "direct");
    CHECK(sdedit(fixture.model, request).replay.method == "sdedit");
}

TEST_CASE("n_max = 0 leaves the source untouched") {
    const BenchmarkFixture fixture;
    EditRequest request = small_request(fixture.config);
    request.schedule = Schedule(Schedule::uniform(12).timesteps(), 0, 0, 1, 1.0);

    CHECK(bitwise_equal(invert_edit(fixture.model, request).edited_points,
                        request.source_points));
    CHECK(bitwise_equal(sdedit(fixture.model, request).edited_points,
                        request.source_points));
}

TEST_CASE("sdedit at full depth is independent of the source") {
    const BenchmarkFixture fixture;
    EditRequest a = small_request(fixture.config, 24, 10, 1, 3);
    EditRequest b = a;
    b.source_points = fixture.config.source.sample(24, 4242);
    REQUIRE_FALSE(bitwise_equal(a.source_points, b.source_points));

    // Full-depth noising keeps none of the source signal.
    CHECK(bitwise_equal(sdedit(fixture.model, a).edited_points,
                        sdedit(fixture.model, b).edited_points));

    // At partial depth it does depend on the source.
    a.schedule = a.schedule.with_n_max(5);
    b.schedule = b.schedule.with_n_max(5);
    CHECK_FALSE(bitwise_equal(sdedit(fixture.model, a).edited_points,
                              sdedit(fixture.model, b).edited_points));
}

TEST_CASE("an n_min tail switches to plain reverse sampling") {
    const BenchmarkFixture fixture;
    EditRequest request = small_request(fixture.config, 24, 12, 2, 9);

    const Batch base = flowedit(fixture.model, request).edited_points;

    EditRequest tailed = request;
    tailed.schedule = request.schedule.with_n_min(4);
    tailed.record_trajectory = true;
    const EditResult result = flowedit(fixture.model, tailed);
    CHECK_FALSE(bitwise_equal(result.edited_points, base));
    CHECK(result.edited_points.allFinite());

    // Two recorded legs: the editing loop down to t_{n_min}, then the tail.
    REQUIRE(result.trajectories.size() == 2);
    CHECK(result.trajectories[0].label == "flowedit");
    CHECK(result.trajectories[1].label == "tar-reverse");
    CHECK(result.trajectories[0].times.front() == 1.0);
    CHECK(result.trajectories[0].times.back() ==
          doctest::Approx(4.0 / 12.0).epsilon(1e-15));
    CHECK(result.trajectories[1].times.front() ==
          doctest::Approx(4.0 / 12.0).epsilon(1e-15));
    CHECK(result.trajectories[1].times.back() == 0.0);
    CHECK(bitwise_equal(result.trajectories[1].endpoint(), result.edited_points));

    // Still a pure function of the request.
    const EditResult again = flowedit(fixture.model, tailed);
    CHECK(bitwise_equal(again.edited_points, result.edited_points));
}

TEST_CASE("recorded trajectories cover every leg of the inversion methods") {
    const BenchmarkFixture fixture;
    EditRequest request = small_request(fixture.config, 8, 10, 1, 2);
    request.record_trajectory = true;

    const EditResult inverted = invert_edit(fixture.model, request);
    REQUIRE(inverted.trajectories.size() == 2);
    CHECK(inverted.trajectories[0].label == "src-forward");
    CHECK(inverted.trajectories[1].label == "tar-reverse");
    CHECK(bitwise_equal(inverted.trajectories[0].states.front(), request.source_points));
    CHECK(bitwise_equal(inverted.trajectories[1].endpoint(), inverted.edited_points));
    for (const Trajectory& traj : inverted.trajectories) CHECK_NOTHROW(traj.check_shape());

    const EditResult direct = direct_path_edit(fixture.model, request);
    REQUIRE(direct.trajectories.size() == 3);
    CHECK(direct.trajectories[0].label == "src-forward");
    CHECK(direct.trajectories[1].label == "tar-reverse");
    CHECK(direct.trajectories[2].label == "direct");
    CHECK(bitwise_equal(direct.trajectories[2].endpoint(), direct.edited_points));
}

TEST_CASE("step scaling at c = 1 is the identity transformation") {
    const BenchmarkFixture fixture;
    const EditRequest request = small_request(fixture.config, 16, 10, 2, 3);
    CHECK(bitwise_equal(flowedit_scaled(fixture.model, request, 1.0).edited_points,
                        flowedit(fixture.model, request).edited_points));
    CHECK_FALSE(bitwise_equal(flowedit_scaled(fixture.model, request, 0.7).edited_points,
                              flowedit(fixture.model, request).edited_points));
    CHECK(flowedit_scaled(fixture.model, request, 0.7).replay.step_scale_c == 0.7);
}

TEST_CASE("the expectation variant reports a usable Monte Carlo error bar") {
    const BenchmarkFixture fixture;
    const EditRequest request = small_request(fixture.config, 16, 10, 1, 6);

    CHECK_THROWS_AS(flowedit_expectation(fixture.model, request, 255),
                    std::invalid_argument);

    const EditResult coarse = flowedit_expectation(fixture.model, request, 512);
    const EditResult fine = flowedit_expectation(fixture.model, request, 1024);

    REQUIRE(coarse.endpoint_mc_se.rows() == 16);
    REQUIRE(coarse.endpoint_mc_se.cols() == 2);
    CHECK(coarse.endpoint_mc_se.allFinite());
    CHECK((coarse.endpoint_mc_se.array() >= 0.0).all());
    CHECK(coarse.endpoint_mc_se.maxCoeff() > 0.0);
    CHECK(coarse.replay.n_avg == 512);
    CHECK(coarse.replay.method == "flowedit_expectation");

    // Doubling the draw count must move the endpoint by no more than a few
    // combined standard errors (the 512 draws are a prefix of the 1024).
    const Batch bound =
        6.0 * (coarse.endpoint_mc_se + fine.endpoint_mc_se).array() + 1e-9;
    CHECK(((fine.edited_points - coarse.edited_points).cwiseAbs().array() <=
           bound.array())
              .all());

    // More draws shrink the reported error bar roughly like 1/sqrt(n).
    const double ratio = coarse.endpoint_mc_se.mean() / fine.endpoint_mc_se.mean();
    CHECK(ratio > 1.1);
    CHECK(ratio < 1.9);
}

TEST_CASE("the shared-noise ablation changes the draw but stays deterministic") {
    const BenchmarkFixture fixture;
    EditRequest shared = small_request(fixture.config, 20, 12, 2, 8);
    EditRequest independent = shared;
    independent.shared_noise = false;

    const Batch a = flowedit(fixture.model, shared).edited_points;
    const Batch b = flowedit(fixture.model, independent).edited_points;
    CHECK_FALSE(bitwise_equal(a, b));
    CHECK(bitwise_equal(flowedit(fixture.model, independent).edited_points, b));
    CHECK(flowedit(fixture.model, independent).replay.shared_noise == false);
}

TEST_CASE("guidance at scale one reproduces the unguided edit") {
    const BenchmarkFixture fixture;
    EditRequest plain = small_request(fixture.config, 24, 20, 4, 17);
    EditRequest guided = plain;
    guided.guidance.enabled = true;
    guided.guidance.unconditional = "uncond";
    guided.guidance.source_scale = 1.0;
    guided.guidance.target_scale = 1.0;

    CHECK(max_abs_diff(flowedit(fixture.model, plain).edited_points,
                       flowedit(fixture.model, guided).edited_points) < 1e-9);

    // A different scale genuinely changes the field.
    guided.guidance.target_scale = 2.0;
    CHECK(max_abs_diff(flowedit(fixture.model, plain).edited_points,
                       flowedit(fixture.model, guided).edited_points) > 1e-3);
}

TEST_CASE("requests are validated before any integration starts") {
    const BenchmarkFixture fixture;
    EditRequest request = small_request(fixture.config);

    EditRequest bad_dim = request;
    bad_dim.source_points = Batch::Zero(4, 3);
    CHECK_THROWS_AS(flowedit(fixture.model, bad_dim), std::invalid_argument);

    EditRequest bad_values = request;
    bad_values.source_points(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(invert_edit(fixture.model, bad_values), std::invalid_argument);

    EditRequest bad_condition = request;
    bad_condition.tar_condition = "nope";
    CHECK_THROWS_WITH_AS(sdedit(fixture.model, bad_condition),
                         doctest::Contains("not registered"), std::invalid_argument);

    EditRequest bad_uncond = request;
    bad_uncond.guidance.enabled = true;
    bad_uncond.guidance.unconditional = "missing";
    CHECK_THROWS_AS(flowedit(fixture.model, bad_uncond), std::invalid_argument);

    CHECK_THROWS_AS(run_edit_method(fixture.model, "unknown", request), config_error);
}
