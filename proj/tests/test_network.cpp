#include <doctest.h>

#include <Eigen/SVD>
#include <sstream>

#include "oracles.hpp"
#include "tslab/data.hpp"
#include "tslab/network.hpp"

using namespace tslab;

namespace {

NetworkSpec random_spec(SeededRng& rng, std::size_t max_width, std::size_t max_depth) {
  const std::size_t depth = 1 + rng.index(max_depth);
  std::vector<std::size_t> widths(depth + 1);
  for (auto& w : widths) w = 1 + rng.index(max_width);
  const Activation acts[] = {Activation::identity, Activation::tanh, Activation::sigmoid, Activation::softplus};
  const Activation act = acts[rng.index(4)];
  return act == Activation::identity ? NetworkSpec::dlnn(widths) : NetworkSpec::fcdnn(widths, act);
}

ParamVector random_params(const NetworkSpec& spec, SeededRng& rng, double scale = 1.0) {
  std::vector<double> v(spec.param_count());
  for (double& x : v) x = rng.uniform(-scale, scale);
  return ParamVector(spec, std::move(v));
}

Dataset random_dataset(const NetworkSpec& spec, std::size_t n, SeededRng& rng) {
  Matrix x(n, spec.input_dim()), y(n, spec.output_dim());
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  for (double& v : y.data()) v = rng.uniform(-1.0, 1.0);
  return Dataset{std::move(x), std::move(y), 0};
}

}  // namespace

TEST_CASE("param_count") {
  CHECK(param_count(NetworkSpec::dlnn({2, 5, 1})) == 21);
  CHECK(param_count(NetworkSpec::dlnn({1, 1})) == 2);
  CHECK(param_count(NetworkSpec::dlnn({2, 10, 10, 1})) == 151);

  SeededRng rng(1, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto spec = random_spec(rng, 8, 5);
    CHECK(ParamVector(spec).size() == param_count(spec));
  }
}

TEST_CASE("spec validation") {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  CHECK(kind_of([] { NetworkSpec::dlnn({3}); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { NetworkSpec::dlnn({2, 0, 1}); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { NetworkSpec({2, 3, 1}, Activation::tanh, Family::dlnn); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { parse_activation("relu"); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { parse_activation("leaky_relu"); }) == ErrorKind::InvalidSpec);
  CHECK(parse_activation("softplus") == Activation::softplus);
  CHECK(kind_of([] { ParamVector(NetworkSpec::dlnn({1, 1}), {1.0}); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { ParamVector(NetworkSpec::dlnn({1, 1}), {1.0, std::nan("")}); }) == ErrorKind::NonFinite);
}

TEST_CASE("forward special cases") {
  const auto tanh_spec = NetworkSpec::fcdnn({3, 4, 2}, Activation::tanh);
  const std::vector<double> x{0.3, -0.7, 0.9};
  const Vector y = forward(ParamVector(tanh_spec), x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);

  ParamVector p(NetworkSpec::fcdnn({1, 2, 1}, Activation::tanh));
  p.set_weight(1, Matrix{{1}, {-1}});
  p.set_weight(2, Matrix{{1, 1}});
  const std::vector<double> half{0.5};
  CHECK(std::abs(forward(p, half)[0]) <= 1e-15);

  // Only the output bias survives when every weight is zero.
  ParamVector q(NetworkSpec::dlnn({2, 3, 2}));
  const std::vector<double> bias{1.25, -3.0};
  q.set_bias(2, bias);
  const Vector z = forward(q, std::vector<double>{0.4, 0.1});
  CHECK(z[0] == 1.25);
  CHECK(z[1] == -3.0);
}

TEST_CASE("linear network equals collapsed affine map") {
  SeededRng rng(2, 0);
  const auto spec = NetworkSpec::dlnn({2, 3, 1});
  for (int rep = 0; rep < 50; ++rep) {
    const auto p = random_params(spec, rng);
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Matrix a = matmul(p.weight(2), p.weight(1));
    const Vector c = matvec(p.weight(2), p.bias(1).data());
    const double expected = a(0, 0) * x[0] + a(0, 1) * x[1] + c[0] + p.bias(2)[0];
    CHECK(forward(p, x)[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("dlnn forward is affine in x") {
  SeededRng rng(3, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::size_t> widths(2 + rng.index(4));
    for (auto& w : widths) w = 1 + rng.index(6);
    const auto spec = NetworkSpec::dlnn(widths);
    const auto p = random_params(spec, rng);
    std::vector<double> x1(spec.input_dim()), x2(spec.input_dim()), mix(spec.input_dim());
    const double t = rng.uniform();
    for (std::size_t i = 0; i < x1.size(); ++i) {
      x1[i] = rng.uniform(-1, 1);
      x2[i] = rng.uniform(-1, 1);
      mix[i] = t * x1[i] + (1 - t) * x2[i];
    }
    const Vector f1 = forward(p, x1), f2 = forward(p, x2), fm = forward(p, mix);
    for (std::size_t k = 0; k < fm.size(); ++k) CHECK(std::abs(fm[k] - (t * f1[k] + (1 - t) * f2[k])) <= 1e-10);
  }
}

TEST_CASE("forward matches naive evaluation for every activation") {
  SeededRng rng(4, 0);
  for (int rep = 0; rep < 100; ++rep) {
    const auto spec = random_spec(rng, 6, 4);
    const auto p = random_params(spec, rng);
    std::vector<double> x(spec.input_dim());
    for (double& v : x) v = rng.uniform(-1, 1);
    const Vector ours = forward(p, x);
    const auto ref = oracle::naive_forward<double>(spec, p.data(), x);
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(ours[k] == doctest::Approx(ref[k]).epsilon(1e-13));
  }
}

TEST_CASE("gradient hand case") {
  const auto spec = NetworkSpec::dlnn({1, 1});
  const ParamVector p(spec, {2.0, 0.0});
  const Dataset d{Matrix{{1.0}}, Matrix{{0.0}}, 0};
  Evaluator ev(spec);
  std::vector<double> g(2);
  CHECK(ev.loss_and_gradient(p.data(), d, g) == 2.0);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 2.0);
}

TEST_CASE("gradient vanishes at an interpolator") {
  SeededRng rng(5, 0);
  const auto spec = NetworkSpec::fcdnn({2, 4, 3}, Activation::sigmoid);
  const Teacher t{random_params(spec, rng)};
  const Dataset d = sample_dataset(t, 12, InputBox{}, SeededRng(5, 1));
  for (double g : gradient(t.params, d)) CHECK(std::abs(g) <= 1e-12);
}

TEST_CASE("gradient matches central differences") {
  SeededRng rng(6, 0);
  auto check = [](const NetworkSpec& spec, const ParamVector& p, const Dataset& d) {
    const auto g = gradient(p, d);
    const auto fd = oracle::fd_gradient(spec, p.data(), d);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::abs(fd[i]) <= 1e-8) continue;
      CHECK(std::abs(g[i] - fd[i]) <= 1e-5 * std::abs(fd[i]));
    }
  };

  const auto tanh_spec = NetworkSpec::fcdnn({2, 4, 1}, Activation::tanh);
  check(tanh_spec, random_params(tanh_spec, rng), random_dataset(tanh_spec, 10, rng));

  for (int rep = 0; rep < 100; ++rep) {
    const auto spec = random_spec(rng, 6, 4);
    check(spec, random_params(spec, rng), random_dataset(spec, 1 + rng.index(8), rng));
  }
}

TEST_CASE("param_jacobian_norm") {
  const ParamVector lin(NetworkSpec::dlnn({1, 1}), {0.7, -0.2});
  CHECK(param_jacobian_norm(lin, std::vector<double>{3.0}) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));

  SeededRng rng(7, 0);
  // Scalar output: the Jacobian is the gradient row.
  const auto scalar = NetworkSpec::fcdnn({3, 5, 1}, Activation::softplus);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = random_params(scalar, rng);
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Matrix j = param_jacobian(p, x);
    double sq = 0.0;
    for (double v : j.data()) sq += v * v;
    CHECK(param_jacobian_norm(p, x) == doctest::Approx(std::sqrt(sq)).epsilon(1e-10));
  }

  const auto multi = NetworkSpec::fcdnn({2, 4, 3, 3}, Activation::tanh);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = random_params(multi, rng);
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto fd = oracle::fd_jacobian(multi, p.data(), x);
    const double ref = Eigen::JacobiSVD<Eigen::MatrixXd>(fd).singularValues()(0);
    CHECK(param_jacobian_norm(p, x) == doctest::Approx(ref).epsilon(1e-5));
    CHECK((oracle::to_eigen(param_jacobian(p, x)) - fd).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("estimate_lipschitz") {
  const auto lin = NetworkSpec::dlnn({1, 1});
  const double small = estimate_lipschitz(lin, DomainBox(10.0), InputBox{}, 10, SeededRng(8, 0));
  const double large = estimate_lipschitz(lin, DomainBox(10.0), InputBox{}, 20000, SeededRng(8, 0));
  CHECK(small <= std::sqrt(2.0) + 1e-15);
  CHECK(large <= std::sqrt(2.0) + 1e-15);
  CHECK(large >= small);
  CHECK(large >= std::sqrt(2.0) - 1e-3);

  // One probe reproduces the single Jacobian norm at the drawn point.
  const auto spec = NetworkSpec::fcdnn({2, 3, 1}, Activation::tanh);
  SeededRng probe(9, 0);
  const ParamVector theta = box_uniform(spec, DomainBox(2.0), probe);
  const std::vector<double> x{probe.uniform(-1, 1), probe.uniform(-1, 1)};
  CHECK(estimate_lipschitz(spec, DomainBox(2.0), InputBox{}, 1, SeededRng(9, 0)) ==
        doctest::Approx(param_jacobian_norm(theta, x)).epsilon(1e-12));

  // Probes are drawn sequentially, so more probes never lower the estimate.
  // The supremum over B = 2 is attained at z = 0, |w2| = 2, x a corner:
  // 5 hidden units each contribute 4·(2 + 1) to ‖J‖², plus 1 from b2.
  const auto tanh_spec = NetworkSpec::fcdnn({2, 5, 1}, Activation::tanh);
  const double q_sup = std::sqrt(61.0);
  double previous = 0.0;
  for (std::size_t probes : {100u, 10000u, 100000u}) {
    const double q = estimate_lipschitz(tanh_spec, DomainBox(2.0), InputBox{}, probes, SeededRng(10, 0));
    CHECK(q >= previous);
    CHECK(q <= q_sup);
    previous = q;
  }
  CHECK(previous >= 0.6 * q_sup);
}

TEST_CASE("xavier_uniform and box_uniform ranges") {
  SeededRng rng(11, 0);
  const auto spec = NetworkSpec::dlnn({2, 5, 1});
  const double lim1 = std::sqrt(6.0 / 7.0), lim2 = std::sqrt(1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = xavier_uniform(spec, rng);
    CHECK(max_abs(p.weight(1).data()) <= lim1);
    CHECK(max_abs(p.weight(2).data()) <= lim2);
    CHECK(max_abs(p.bias(1).data()) == 0.0);
    CHECK(max_abs(p.bias(2).data()) == 0.0);
    CHECK(DomainBox(3.0).contains(box_uniform(spec, DomainBox(3.0), rng).data()));
  }
}

TEST_CASE("parameter serialization round trip") {
  SeededRng rng(12, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const auto spec = random_spec(rng, 5, 3);
    const auto p = random_params(spec, rng, 1e3);
    std::stringstream buf;
    write_params(buf, p);
    const std::string raw = buf.str();
    const auto header_end = raw.find('\n');
    REQUIRE(header_end != std::string::npos);
    CHECK(raw.size() - header_end - 1 == 8 * p.size());
    CHECK(raw.substr(0, header_end).find("\"widths\"") != std::string::npos);
    CHECK(read_params(buf) == p);
  }
  std::stringstream bad("{\"widths\":[1,1],\"activation\":\"identity\",\"family\":\"dlnn\"}\nabc");
  CHECK_THROWS_AS(read_params(bad), Error);

  std::stringstream csv;
  write_params_csv(csv, ParamVector(NetworkSpec::dlnn({1, 1}), {0.1, -2.0}));
  CHECK(csv.str() == "0.10000000000000001\n-2\n");
}
