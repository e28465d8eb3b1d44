#include "shipctl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "shipctl/error.hpp"

namespace shipctl {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw Error(ErrorKind::Config, "config line " + std::to_string(line) + ": " + msg);
}

}  // namespace

void ShipParams::validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidParameter, what); };
    ShipParams copy = *this;
    for (const auto& [name, ptr] : config_fields(copy))
        if (!std::isfinite(*ptr)) bad(name + " is not finite");
    if (!(propeller.D_p > 0.0)) bad("propeller.D_p must be positive");
    if (!(propeller.n_p > 0.0)) bad("propeller.n_p must be positive");
    if (!(geometry.L_pp > 0.0)) bad("geometry.L_pp must be positive");
    if (!(geometry.rho > 0.0)) bad("geometry.rho must be positive");
    if (!(geometry.draft > 0.0)) bad("geometry.draft must be positive");
    if (geometry.x_T < -0.5 || geometry.x_T > 0.5) bad("geometry.x_T must lie in [-0.5, 0.5]");
    const double D = (mass.m + mass.m_vv) * (mass.I_z + mass.m_rr) - mass.m_rv * mass.m_vr;
    if (!(D > 0.0)) throw Error(ErrorKind::SingularMassMatrix, "singular mass matrix (D <= 0)");
}

std::vector<std::pair<std::string, double*>> config_fields(ShipParams& p) {
    auto& m = p.mass;
    auto& h = p.hull;
    auto& pr = p.propeller;
    auto& g = p.geometry;
    return {
        {"mass.m", &m.m}, {"mass.m_uu", &m.m_uu}, {"mass.m_vv", &m.m_vv}, {"mass.m_rr", &m.m_rr},
        {"mass.m_vr", &m.m_vr}, {"mass.m_rv", &m.m_rv}, {"mass.I_z", &m.I_z},
        {"hull.X_uu", &h.X_uu}, {"hull.X_bg", &h.X_bg}, {"hull.Y_b", &h.Y_b}, {"hull.Y_g", &h.Y_g},
        {"hull.Y_bb", &h.Y_bb}, {"hull.Y_gg", &h.Y_gg}, {"hull.Y_bag", &h.Y_bag}, {"hull.Y_abg", &h.Y_abg},
        {"hull.Y_ab", &h.Y_ab}, {"hull.N_b", &h.N_b}, {"hull.N_g", &h.N_g}, {"hull.N_bb", &h.N_bb},
        {"hull.N_gg", &h.N_gg}, {"hull.N_bbg", &h.N_bbg}, {"hull.N_bgg", &h.N_bgg}, {"hull.N_upgc", &h.N_upgc},
        {"hull.N_ab", &h.N_ab}, {"hull.a_y", &h.a_y}, {"hull.b_y", &h.b_y}, {"hull.a_n", &h.a_n},
        {"hull.b_n", &h.b_n}, {"hull.c_n", &h.c_n},
        {"propeller.D_p", &pr.D_p}, {"propeller.n_p", &pr.n_p},
        {"propeller.K_T0", &pr.K_T[0]}, {"propeller.K_T1", &pr.K_T[1]}, {"propeller.K_T2", &pr.K_T[2]},
        {"propeller.K_T3", &pr.K_T[3]}, {"propeller.K_T4", &pr.K_T[4]}, {"propeller.K_T5", &pr.K_T[5]},
        {"propeller.thrust_deduction", &pr.thrust_deduction}, {"propeller.wake_fraction", &pr.wake_fraction},
        {"geometry.L_pp", &g.L_pp}, {"geometry.draft", &g.draft}, {"geometry.rho", &g.rho},
        {"geometry.x_T", &g.x_T},
    };
}

ShipParams parse_config(std::istream& in, ShipParams base) {
    auto fields = config_fields(base);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) fail(line, "expected 'section.key = value'");
        const std::string key = trim(text.substr(0, eq));
        const std::string val = trim(text.substr(eq + 1));
        if (key.empty() || val.empty()) fail(line, "expected 'section.key = value'");
        double* target = nullptr;
        for (auto& [name, ptr] : fields)
            if (name == key) target = ptr;
        if (!target) fail(line, "unknown key '" + key + "'");
        double x = 0.0;
        const auto [end, ec] = std::from_chars(val.data(), val.data() + val.size(), x);
        if (ec != std::errc() || end != val.data() + val.size()) fail(line, "bad number '" + val + "'");
        *target = x;
    }
    return base;
}

ShipParams load_config(const std::string& path, ShipParams base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file " + path);
    return parse_config(in, std::move(base));
}

std::string to_config(const ShipParams& p) {
    ShipParams copy = p;
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& [name, ptr] : config_fields(copy)) os << name << " = " << *ptr << '\n';
    return os.str();
}

}  // namespace shipctl
