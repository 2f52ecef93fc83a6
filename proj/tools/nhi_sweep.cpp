#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nhi/sweep.hpp"

namespace {

using namespace nhi;
using namespace nhi::sweep;

/// Raw flag values; empty optionals mean "not given on the command line".
struct Flags {
    std::optional<std::string> model;
    std::optional<int> n;
    std::optional<double> g;
    std::optional<double> tPrime;
    std::optional<std::string> v0;
    std::optional<std::string> er;
    std::optional<std::string> tPrimeGrid;
    std::optional<std::string> element;
    std::optional<int> threads;
    std::optional<int> nk;
    std::optional<double> relStep;
    std::optional<std::string> out;
    std::optional<std::string> config;
    bool includeBound = false;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON config file, - for stdin; flags override its fields");
    sub->add_option("--model", f.model, "hn or ssh");
    sub->add_option("--n", f.n, "number of sites (hn) or unit cells (ssh)");
    sub->add_option("--g", f.g, "non-reciprocity");
    sub->add_option("--t-prime", f.tPrime, "ssh inter-cell hopping");
    sub->add_option("--v0", f.v0, "impurity: value, log:a:b:n or lin:a:b:n");
    sub->add_option("--out", f.out, "output file (stdout if omitted)");
    sub->add_option("--threads", f.threads, "worker threads");
}

SweepConfig merge(const Flags& f) {
    SweepConfig c;
    if (f.config) {
        std::stringstream ss;
        if (*f.config == "-") {
            ss << std::cin.rdbuf();
        } else {
            std::ifstream in(*f.config);
            if (!in)
                throw Error(ErrorKind::InvalidInput, "config: cannot open '" + *f.config + "'");
            ss << in.rdbuf();
        }
        c = parse_config_text(ss.str());
    }
    if (f.model)
        c.model = parse_model(*f.model);
    if (f.n)
        c.N = *f.n;
    if (f.g)
        c.g = *f.g;
    if (f.tPrime)
        c.tPrime = *f.tPrime;
    if (f.v0)
        c.v0 = parse_grid(*f.v0, "v0");
    if (f.er)
        c.er = parse_complex(*f.er, "er");
    if (f.tPrimeGrid)
        c.tPrimeGrid = parse_grid(*f.tPrimeGrid, "t_prime_grid");
    if (f.element)
        c.element = parse_element(*f.element);
    if (f.threads)
        c.threads = *f.threads;
    if (f.nk)
        c.nK = *f.nk;
    if (f.relStep)
        c.relStep = *f.relStep;
    if (f.out)
        c.out = *f.out;
    if (f.includeBound)
        c.includeBound = true;
    return c;
}

void emit(const SweepConfig& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream file(c.out, std::ios::binary);
    if (!file)
        throw Error(ErrorKind::InvalidInput, "out: cannot open '" + c.out + "' for writing");
    file << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Impurity spectra, localization and response for non-reciprocal rings"};
    app.set_version_flag("--version", std::string("nhi-sweep ") + kToolVersion);
    app.require_subcommand(1);

    Flags flags;
    Command cmd = Command::Spectrum;
    auto sub = [&](const char* name, const char* help, Command c) {
        CLI::App* s = app.add_subcommand(name, help);
        add_common(s, flags);
        s->callback([&cmd, c] { cmd = c; });
        return s;
    };

    sub("spectrum", "eigenpairs at one V0 (CSV)", Command::Spectrum);
    auto* ipr = sub("ipr-sweep", "average IPR and realness along a V0 grid (CSV)", Command::IprSweep);
    ipr->add_flag("--include-bound", flags.includeBound, "include the bound state in the IPR average");
    sub("critical", "closed-form and exact critical impurity strength (JSON)", Command::Critical);
    auto* gap = sub("gap-scan", "smallest |E| against t' (CSV, ssh only)", Command::GapScan);
    gap->add_option("--t-prime-grid", flags.tPrimeGrid, "t' grid, default lin:-3:3:600");
    auto* wind = sub("winding", "periodic-ring winding number around Er (JSON)", Command::Winding);
    wind->add_option("--er", flags.er, "reference energy re[,im]");
    wind->add_option("--nk", flags.nk, "initial momentum samples");
    auto* nu = sub("nu-sweep", "log-derivative response along a V0 grid (CSV)", Command::NuSweep);
    nu->add_option("--er", flags.er, "reference energy re[,im]");
    nu->add_option("--element", flags.element, "impurity-neighbours or corner");
    nu->add_option("--rel-step", flags.relStep, "relative V0 step of the derivative");
    sub("flow", "continuously tracked spectrum along a V0 grid (CSV)", Command::Flow);
    sub("validate", "exact solver against the dense oracle (JSON)", Command::Validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const SweepConfig cfg = merge(flags);
        const Output out = run(cmd, cfg);
        emit(cfg, out.text);
        return out.passed ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << error_json(e) << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << error_json(Error(ErrorKind::NumericalFailure, e.what())) << '\n';
        return 2;
    }
}
