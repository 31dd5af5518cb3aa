#include "spo/synthgen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "spo/io_util.hpp"
#include "spo/link_estimation.hpp"
#include "spo/rng.hpp"

namespace spo {

double SyntheticWorld::reward(const std::vector<double>& x, int y) const {
    const std::vector<double> lp = teacher.log_prob(x);
    return reward_scale * (lp[static_cast<std::size_t>(y)] - std::log(reference[y]));
}

std::vector<double> SyntheticWorld::reward_row(const std::vector<double>& x) const {
    std::vector<double> lp = teacher.log_prob(x);
    for (int y = 0; y < num_actions; ++y) {
        auto& v = lp[static_cast<std::size_t>(y)];
        v = reward_scale * (v - std::log(reference[y]));
    }
    return lp;
}

std::vector<double> SyntheticWorld::true_potential_row(const std::vector<double>& x) const {
    std::vector<double> lp = teacher.log_prob(x);
    for (int y = 0; y < num_actions; ++y)
        lp[static_cast<std::size_t>(y)] -= std::log(reference[y]);
    return lp;
}

double link_mixture(double u, double shift, double slope) {
    // 0.5 s(a(u-shift)) + 0.5 s(a(u+shift)) written through tanh.  tanh is
    // odd bit-for-bit and the two arguments negate exactly under u -> -u, so
    // g(u) + g(-u) == 1 holds exactly, not just to rounding.
    const double half_slope = 0.5 * slope;
    const double odd_part =
        0.25 * (std::tanh(half_slope * (u - shift)) + std::tanh(half_slope * (u + shift)));
    return 0.5 + odd_part;
}

SyntheticWorld gen_world(std::uint64_t seed, double link_shift, int context_dim, int num_actions,
                         int hidden) {
    MlpShape shape{context_dim, hidden, num_actions};
    SyntheticWorld world{context_dim,
                         num_actions,
                         10.0,
                         link_shift,
                         4.0,
                         seed,
                         MlpPolicy::random_init(shape, derive_seed(seed, "teacher")),
                         ProbabilityRow::uniform(num_actions)};
    return world;
}

Dataset gen_dataset(const SyntheticWorld& world, int n, std::uint64_t seed, bool debug) {
    if (n < 1) throw std::invalid_argument("gen_dataset: n must be >= 1");
    Rng rng(seed);
    Dataset data;
    data.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        PreferenceExample ex;
        ex.id = i;
        ex.x.resize(static_cast<std::size_t>(world.context_dim));
        for (double& v : ex.x) v = rng.normal();
        ex.y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(world.num_actions)));
        ex.y1 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(world.num_actions)));
        const std::vector<double> r = world.reward_row(ex.x);
        const double gap = r[static_cast<std::size_t>(ex.y1)] - r[static_cast<std::size_t>(ex.y0)];
        ex.z = rng.uniform() < link_mixture(gap, world.link_shift, world.link_slope) ? 1 : 0;
        if (debug) ex.delta_r = gap;
        data.push_back(std::move(ex));
    }
    return data;
}

std::vector<std::vector<double>> gen_contexts(int count, int dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(count));
    for (auto& x : xs) {
        x.resize(static_cast<std::size_t>(dim));
        for (double& v : x) v = rng.normal();
    }
    return xs;
}

void save_dataset_csv(const Dataset& data, int context_dim, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open dataset file for write: " + path);
    for (int j = 1; j <= context_dim; ++j) out << "x_" << j << ",";
    out << "y0,y1,z\n";
    for (const PreferenceExample& ex : data) {
        for (double v : ex.x) out << format_double(v) << ",";
        out << ex.y0 << "," << ex.y1 << "," << ex.z << "\n";
    }
}

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
    const std::size_t columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 4) throw std::runtime_error("dataset header too short: " + path);
    const std::size_t dim = columns - 3;

    Dataset data;
    std::int64_t id = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        PreferenceExample ex;
        ex.id = id++;
        ex.x.reserve(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!std::getline(row, cell, ',')) throw std::runtime_error("short dataset row");
            ex.x.push_back(std::stod(cell));
        }
        if (!std::getline(row, cell, ',')) throw std::runtime_error("short dataset row");
        ex.y0 = std::stoi(cell);
        if (!std::getline(row, cell, ',')) throw std::runtime_error("short dataset row");
        ex.y1 = std::stoi(cell);
        if (!std::getline(row, cell, ',')) throw std::runtime_error("short dataset row");
        ex.z = std::stoi(cell);
        data.push_back(std::move(ex));
    }
    return data;
}

void save_dataset_metadata(const SyntheticWorld& world, int n, std::uint64_t data_seed,
                           const std::string& teacher_checkpoint, const std::string& path) {
    nlohmann::json meta;
    meta["seed"] = data_seed;
    meta["world_seed"] = world.seed;
    meta["s"] = world.link_shift;
    meta["n"] = n;
    meta["context_dim"] = world.context_dim;
    meta["num_actions"] = world.num_actions;
    meta["reward_scale"] = world.reward_scale;
    meta["link_slope"] = world.link_slope;
    meta["teacher_checkpoint"] = teacher_checkpoint;
    meta["seed_derivation"] = "splitmix64(master ^ fnv1a64(tag))";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open metadata file for write: " + path);
    out << meta.dump(2) << "\n";
}

}  // namespace spo
