#include "catch_amalgamated.hpp"

#include <random>

#include "nhi/sweep.hpp"

using namespace nhi;
using namespace nhi::sweep;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidInput;
}

SweepConfig hn(int N, double g, const std::string& v0) {
    SweepConfig c;
    c.N = N;
    c.g = g;
    c.v0 = parse_grid(v0, "v0");
    return c;
}

} // namespace

TEST_CASE("number formatting round-trips") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> ex(-300, 300);
    for (int i = 0; i < 2000; ++i) {
        const double x = std::ldexp(mant(rng), ex(rng));
        CHECK(parse_number(format_double(x), "x") == x);
    }
    CHECK(format_double(-0.0) == "0");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e12) == "1e+12");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-HUGE_VAL) == "-inf");
}

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("grid parsing") {
    const auto log = parse_grid("log:1:1e12:301", "v0");
    CHECK(log.kind == GridSpec::Kind::Log);
    CHECK(log.values().size() == 301);
    CHECK(log.text() == "log:1:1e+12:301");
    const auto lin = parse_grid("lin:-3:3:7", "t");
    CHECK(lin.values() == std::vector<double>{-3, -2, -1, 0, 1, 2, 3});
    CHECK(parse_grid("+5", "v0").values() == std::vector<double>{5.0});
    for (const char* bad : {"log:0:1:5", "log:2:1:5", "lin:0:1:1", "lin:0:1:2.5", "lin:0:1", "abc", "", "log:1:x:4"})
        CHECK(kind_of([&] { parse_grid(bad, "v0"); }) == ErrorKind::InvalidInput);
    CHECK(parse_complex("0.72,0.64", "er") == cplx(0.72, 0.64));
    CHECK(parse_complex("3", "er") == cplx(3.0, 0.0));
}

TEST_CASE("config documents") {
    const auto c = parse_config_text(R"({"model":"ssh","n":10,"g":0.5,"t_prime":1.5,"v0":"log:1:1e3:5",
                                         "er":[0.1,0.2],"element":"corner","threads":2})");
    CHECK(c.model == ModelKind::SSH);
    CHECK(*c.N == 10);
    CHECK(*c.tPrime == 1.5);
    CHECK(c.v0->count == 5);
    CHECK(*c.er == cplx(0.1, 0.2));
    CHECK(c.element == ResponseElement::Corner);
    CHECK(c.threads == 2);
    try {
        parse_config_text(R"({"n":10,"colour":"red"})");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("colour") != std::string::npos);
    }
    CHECK(kind_of([] { parse_config_text("{\"n\": 2.5}"); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { parse_config_text("{\"n\": "); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { parse_config_text("[1]"); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { parse_config_text(R"({"model":"xy"})"); }) == ErrorKind::InvalidInput);
}

TEST_CASE("resolve fills defaults and checks ranges") {
    SweepConfig c;
    c.model = ModelKind::SSH;
    c.er = cplx(-2.16, 0.22);
    const auto r = resolve(c, Command::NuSweep);
    CHECK(*r.raw.N == 14);
    CHECK(*r.raw.tPrime == 2.0);
    CHECK(r.v0Grid.size() == 301);
    CHECK(r.assumptions.size() == 1);
    CHECK(*resolve(SweepConfig{.model = ModelKind::SSH}, Command::Spectrum).raw.tPrime == 1.0);
    CHECK(resolve(SweepConfig{}, Command::Spectrum).assumptions.empty());

    CHECK(kind_of([] { resolve(hn(65, 1.0, "1"), Command::Spectrum); }) == ErrorKind::InvalidParameter);
    CHECK(kind_of([] { resolve(hn(1, 1.0, "1"), Command::Spectrum); }) == ErrorKind::InvalidParameter);
    CHECK(kind_of([] { resolve(hn(8, 1.0, "log:1:10:3"), Command::Spectrum); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { resolve(hn(8, 1.0, "3"), Command::IprSweep); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { resolve(hn(8, 1.0, "log:1:10:3"), Command::NuSweep); }) == ErrorKind::InvalidInput);
    auto t = hn(8, 1.0, "1");
    t.threads = 0;
    CHECK(kind_of([&] { resolve(t, Command::Spectrum); }) == ErrorKind::InvalidInput);
    t.threads = 1;
    t.relStep = 1.0;
    CHECK(kind_of([&] { resolve(t, Command::Spectrum); }) == ErrorKind::InvalidInput);
    SweepConfig s{.model = ModelKind::SSH};
    s.tPrime = 0.0;
    CHECK(kind_of([&] { resolve(s, Command::Spectrum); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("config hash depends only on resolved values") {
    auto a = hn(10, 0.5, "log:1:1e6:7");
    auto b = a;
    b.threads = 4;
    b.out = "somewhere.csv";
    const auto ha = base_metadata(resolve(a, Command::IprSweep), Command::IprSweep).entries[3];
    const auto hb = base_metadata(resolve(b, Command::IprSweep), Command::IprSweep).entries[3];
    CHECK(ha.first == "config_hash");
    CHECK(ha.second == hb.second);
    b.g = 0.6;
    CHECK(base_metadata(resolve(b, Command::IprSweep), Command::IprSweep).entries[3].second != ha.second);
}

TEST_CASE("CSV output layout") {
    const auto out = run(Command::Spectrum, hn(6, 0.5, "2"));
    std::istringstream in(out.text);
    std::string line;
    int meta = 0, rows = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            CHECK_FALSE(header);
            ++meta;
        } else if (!header) {
            CHECK(line == "index,re_e,im_e,re_theta,im_theta,class,ipr,solver,residual");
            header = true;
        } else {
            ++rows;
            CHECK(std::count(line.begin(), line.end(), ',') == 8);
        }
    }
    CHECK(meta >= 5);
    CHECK(rows == 6);
}

TEST_CASE("output is independent of the thread count") {
    for (Command cmd : {Command::IprSweep, Command::NuSweep, Command::Flow}) {
        auto c = hn(10, 1.0, "log:1:1e8:17");
        c.er = cplx(0.72, 0.64);
        c.threads = 1;
        const auto one = run(cmd, c).text;
        c.threads = 4;
        CHECK(run(cmd, c).text == one);
    }
    SweepConfig s{.model = ModelKind::SSH};
    s.N = 8;
    s.v0 = parse_grid("30", "v0");
    s.tPrimeGrid = parse_grid("lin:0.05:3:60", "t");
    s.threads = 1;
    const auto one = run(Command::GapScan, s).text;
    s.threads = 3;
    CHECK(run(Command::GapScan, s).text == one);
}

TEST_CASE("JSON commands") {
    const auto crit = json::parse(run(Command::Critical, hn(4, 0.1, "1")).text);
    CHECK(crit["result"]["exact"].get<double>() == Catch::Approx(0.817572325443).epsilon(1e-8));
    CHECK(crit["metadata"]["config"]["n"] == 4);
    CHECK(kind_of([] { run(Command::Critical, hn(4, 0.0, "1")); }) == ErrorKind::InvalidParameter);
    auto w = hn(14, 1.0, "1");
    w.er = cplx(10.0, 0.0);
    const auto wind = json::parse(run(Command::Winding, w).text);
    CHECK(wind["result"]["winding"] == 0);
    CHECK(wind["metadata"]["assumptions"].size() == 1);
}

TEST_CASE("validate suite passes") {
    const auto checks = default_equivalence_suite(2);
    CHECK(checks.size() == 24);
    for (const auto& c : checks) {
        INFO("N=" << c.N << " g=" << c.g << " V0=" << c.V0);
        CHECK(c.passed);
    }
    CHECK(run(Command::Validate, SweepConfig{}).passed);
}

TEST_CASE("exit codes and error documents") {
    CHECK(exit_code(ErrorKind::InvalidInput) == 1);
    CHECK(exit_code(ErrorKind::InvalidParameter) == 1);
    CHECK(exit_code(ErrorKind::IllConditioned) == 2);
    CHECK(exit_code(ErrorKind::OnSpectrum) == 2);
    const auto j = json::parse(error_json(Error(ErrorKind::OnSpectrum, "too close", 1e-9)));
    CHECK(j["error"] == to_string(ErrorKind::OnSpectrum));
    CHECK(j["message"] == "too close");
    CHECK(j["value"].get<double>() == 1e-9);
}
