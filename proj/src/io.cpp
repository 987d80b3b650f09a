#include "evdr/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace evdr {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
    T value{};
    std::istringstream in(text);
    in >> value;
    if (in.fail() || !(in >> std::ws).eof())
        throw ParseError(what + ": cannot parse '" + text + "'");
    return value;
}

std::ifstream open_input(const fs::path& path, std::string_view what) {
    std::ifstream in(path);
    if (!in)
        throw NotFoundError(std::string(what) + " not found: " + path.string());
    return in;
}

} // namespace

std::string format_double(double v) {
    if (std::isnan(v))
        return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Fleet read_fleet(std::istream& in) {
    Fleet fleet;
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        if (header) {
            header = false;
            if (trim(line).rfind("id", 0) == 0)
                continue;
        }
        const auto f = split(line, ',');
        const std::string where = "fleet line " + std::to_string(line_no);
        if (f.size() != 6)
            throw ParseError(where + ": expected 6 fields, got " + std::to_string(f.size()));
        ElectricVehicle ev;
        ev.id = parse_number<int>(f[0], where);
        ev.model_name = f[1];
        ev.max_power_kw = parse_number<double>(f[2], where);
        ev.capacity_kwh = parse_number<double>(f[3], where);
        ev.connector_type = f[4];
        ev.soc = parse_number<double>(f[5], where);
        fleet.push_back(std::move(ev));
    }
    validate_fleet(fleet);
    return fleet;
}

Fleet load_fleet(const fs::path& path) {
    auto in = open_input(path, "fleet file");
    return read_fleet(in);
}

void write_fleet(std::ostream& out, const Fleet& fleet) {
    out << "id,model,max_power_kw,capacity_kwh,connector,soc\n";
    for (const auto& ev : fleet)
        out << ev.id << ',' << ev.model_name << ',' << format_double(ev.max_power_kw) << ','
            << format_double(ev.capacity_kwh) << ',' << ev.connector_type << ','
            << format_double(ev.soc) << '\n';
}

Fleet gen_fleet(std::size_t count, const FleetMix& mix, Rng& rng) {
    if (count == 0)
        throw ArgumentError("fleet size must be >= 1");
    for (double m : mix)
        if (!(m >= 0.0))
            throw ArgumentError("fleet mix fractions must be >= 0");
    if (std::abs(mix[0] + mix[1] + mix[2] - 1.0) > 1e-6)
        throw ArgumentError("fleet mix fractions must sum to 1");

    struct Model {
        const char* name;
        double power_kw;
        double capacity_kwh;
    };
    static constexpr std::array<Model, 3> models{{
        {"Renault ZOE 22", 22.0, 22.0},
        {"Renault ZOE 41", 22.0, 41.0},
        {"Nissan LEAF", 7.0, 24.0},
    }};
    std::discrete_distribution<std::size_t> pick(mix.begin(), mix.end());
    std::uniform_real_distribution<double> soc(0.1, 0.9);
    Fleet fleet;
    for (std::size_t i = 0; i < count; ++i) {
        const auto& m = models[pick(rng)];
        // Round SoC so the fleet survives a trip through CSV unchanged.
        const double s = std::round(soc(rng) * 1e4) / 1e4;
        fleet.push_back({static_cast<int>(i + 1), m.name, m.power_kw, m.capacity_kwh, "Type2", s});
    }
    return fleet;
}

std::vector<double> read_target(std::istream& in) {
    std::vector<double> target;
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        if (header) {
            header = false;
            if (trim(line).rfind("slot", 0) == 0)
                continue;
        }
        const auto f = split(line, ',');
        const std::string where = "target line " + std::to_string(line_no);
        if (f.size() != 2)
            throw ParseError(where + ": expected 2 fields");
        const auto slot = parse_number<std::size_t>(f[0], where);
        if (slot != target.size())
            throw ParseError(where + ": slots must be listed in order from 0");
        const double e = parse_number<double>(f[1], where);
        if (!(e >= 0.0))
            throw ValidationError(where + ": target energy must be >= 0");
        target.push_back(e);
    }
    return target;
}

std::vector<double> load_target(const fs::path& path) {
    auto in = open_input(path, "target profile");
    return read_target(in);
}

std::vector<double> synthetic_target(const Fleet& fleet, const std::vector<ChargingStation>& stations,
                                     std::size_t horizon, double slot_hours, Scenario scenario,
                                     const SocLimits& limits, double fraction, Rng& rng) {
    if (!(fraction > 0.0))
        throw ArgumentError("target fraction must be > 0");
    if (horizon == 0)
        throw ArgumentError("horizon must be >= 1");
    DRProgram probe{horizon, slot_hours, std::vector<double>(horizon, 0.0), scenario};
    const Environment env(probe, fleet, stations, limits);
    const double total = fraction * env.deliverable_energy();

    const std::size_t blocks = std::min<std::size_t>(3, horizon);
    std::uniform_real_distribution<double> level(0.5, 1.5);
    std::vector<double> levels(blocks);
    for (auto& l : levels)
        l = level(rng);
    std::vector<double> shape(horizon);
    for (std::size_t t = 0; t < horizon; ++t)
        shape[t] = levels[t * blocks / horizon];
    const double sum = std::accumulate(shape.begin(), shape.end(), 0.0);
    for (auto& s : shape)
        s = std::round(s / sum * total * 1e6) / 1e6;
    return shape;
}

namespace {

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + format_double(v[i]);
    return s;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
    std::vector<T> out;
    if (trim(text).empty())
        return out;
    for (const auto& item : split(text, ','))
        out.push_back(parse_number<T>(item, what));
    return out;
}

class Section {
public:
    Section(const pt::ptree& root, const char* name) : name_(name) {
        if (auto child = root.get_child_optional(name))
            tree_ = *child;
    }

    std::optional<std::string> text(const char* key) const {
        if (auto v = tree_.get_optional<std::string>(key))
            return trim(*v);
        return std::nullopt;
    }

    template <typename T>
    void read(const char* key, T& value) const {
        if (auto v = text(key))
            value = parse_number<T>(*v, std::string(name_) + "." + key);
    }

    template <typename T>
    void read_list(const char* key, std::vector<T>& value) const {
        if (auto v = text(key))
            value = parse_list<T>(*v, std::string(name_) + "." + key);
    }

private:
    const char* name_;
    pt::ptree tree_;
};

fs::path resolve_path(const fs::path& base_dir, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

} // namespace

RunConfig parse_config(std::istream& in, const fs::path& base_dir) {
    pt::ptree root;
    try {
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig c;

    const Section program(root, "program");
    if (auto s = program.text("scenario"))
        c.scenario = parse_scenario(*s);
    program.read("horizon", c.horizon);
    program.read("slot_hours", c.slot_hours);
    if (program.text("target")) {
        c.target.emplace();
        program.read_list("target", *c.target);
    }
    if (auto f = program.text("target_file"))
        c.target_file = resolve_path(base_dir, *f);
    if (program.text("target_fraction")) {
        c.target_fraction.emplace();
        program.read("target_fraction", *c.target_fraction);
    }
    program.read("target_seed", c.target_seed);

    const Section fleet(root, "fleet");
    if (auto f = fleet.text("file"))
        c.fleet_file = resolve_path(base_dir, *f);
    fleet.read("generate", c.fleet_count);
    if (fleet.text("mix")) {
        std::vector<double> mix;
        fleet.read_list("mix", mix);
        if (mix.size() != 3)
            throw ConfigError("fleet.mix needs three fractions");
        std::copy(mix.begin(), mix.end(), c.fleet_mix.begin());
    }
    fleet.read("seed", c.fleet_seed);

    const Section stations(root, "stations");
    stations.read("count", c.station_count);
    stations.read("max_power_kw", c.station_power_kw);

    const Section training(root, "training");
    auto& hp = c.hp;
    training.read("epochs", hp.epochs);
    training.read("memory_size", hp.memory_size);
    training.read("batch_size", hp.batch_size);
    training.read("epsilon_initial", hp.epsilon_initial);
    training.read("epsilon_decay", hp.epsilon_decay);
    training.read("epsilon_floor", hp.epsilon_floor);
    training.read("learning_rate", hp.learning_rate);
    training.read("discount", hp.discount);
    training.read("target_sync_every", hp.target_sync_every);
    training.read("max_penalty", hp.max_penalty);
    training.read("soc_min", hp.soc_min);
    training.read("soc_max", hp.soc_max);
    training.read("soc_margin", hp.soc_margin);
    training.read("seed", hp.rng_seed);

    const Section network(root, "network");
    network.read_list("hidden", c.network.hidden);
    network.read("dropout_rate", c.network.dropout_rate);
    network.read_list("dropout_after", c.network.dropout_after);

    const Section evaluation(root, "evaluation");
    evaluation.read("episodes", c.eval_episodes);
    evaluation.read("epsilon", c.eval_epsilon);

    const Section output(root, "output");
    c.out_dir = resolve_path(base_dir, output.text("dir").value_or(c.out_dir.string()));

    const int sources = c.target.has_value() + c.target_file.has_value() + c.target_fraction.has_value();
    if (sources != 1)
        throw ConfigError("program needs exactly one of target, target_file, target_fraction");
    hp.validate();
    return c;
}

RunConfig load_config(const fs::path& path) {
    auto in = open_input(path, "config file");
    return parse_config(in, fs::absolute(path).parent_path());
}

void write_config(std::ostream& out, const RunConfig& c) {
    out << "[program]\n"
        << "scenario = " << to_string(c.scenario) << '\n'
        << "horizon = " << c.horizon << '\n'
        << "slot_hours = " << format_double(c.slot_hours) << '\n';
    if (c.target)
        out << "target = " << join(*c.target) << '\n';
    if (c.target_file)
        out << "target_file = " << c.target_file->string() << '\n';
    if (c.target_fraction)
        out << "target_fraction = " << format_double(*c.target_fraction) << '\n'
            << "target_seed = " << c.target_seed << '\n';

    out << "\n[fleet]\n";
    if (c.fleet_file) {
        out << "file = " << c.fleet_file->string() << '\n';
    } else {
        out << "generate = " << c.fleet_count << '\n'
            << "mix = " << join(std::vector<double>(c.fleet_mix.begin(), c.fleet_mix.end())) << '\n'
            << "seed = " << c.fleet_seed << '\n';
    }

    const auto& hp = c.hp;
    out << "\n[stations]\n"
        << "count = " << c.station_count << '\n'
        << "max_power_kw = " << format_double(c.station_power_kw) << '\n'
        << "\n[training]\n"
        << "epochs = " << hp.epochs << '\n'
        << "memory_size = " << hp.memory_size << '\n'
        << "batch_size = " << hp.batch_size << '\n'
        << "epsilon_initial = " << format_double(hp.epsilon_initial) << '\n'
        << "epsilon_decay = " << format_double(hp.epsilon_decay) << '\n'
        << "epsilon_floor = " << format_double(hp.epsilon_floor) << '\n'
        << "learning_rate = " << format_double(hp.learning_rate) << '\n'
        << "discount = " << format_double(hp.discount) << '\n'
        << "target_sync_every = " << hp.target_sync_every << '\n'
        << "max_penalty = " << format_double(hp.max_penalty) << '\n'
        << "soc_min = " << format_double(hp.soc_min) << '\n'
        << "soc_max = " << format_double(hp.soc_max) << '\n'
        << "soc_margin = " << format_double(hp.soc_margin) << '\n'
        << "seed = " << hp.rng_seed << '\n'
        << "\n[network]\n"
        << "hidden = " << join(c.network.hidden) << '\n'
        << "dropout_rate = " << format_double(c.network.dropout_rate) << '\n'
        << "dropout_after = " << join(c.network.dropout_after) << '\n'
        << "\n[evaluation]\n"
        << "episodes = " << c.eval_episodes << '\n'
        << "epsilon = " << format_double(c.eval_epsilon) << '\n'
        << "\n[output]\n"
        << "dir = " << c.out_dir.string() << '\n';
}

Environment ResolvedRun::environment() const {
    return Environment(program, fleet, stations, hp.soc_limits(), hp.max_penalty);
}

ResolvedRun resolve(const RunConfig& c) {
    ResolvedRun run;
    run.hp = c.hp;
    run.hp.validate();
    run.stations = make_stations(c.station_count, c.station_power_kw);
    if (c.fleet_file) {
        run.fleet = load_fleet(*c.fleet_file);
    } else {
        Rng rng(c.fleet_seed);
        run.fleet = gen_fleet(c.fleet_count, c.fleet_mix, rng);
    }
    run.program.horizon = c.horizon;
    run.program.slot_hours = c.slot_hours;
    run.program.scenario = c.scenario;
    if (c.target) {
        run.program.target = *c.target;
    } else if (c.target_file) {
        run.program.target = load_target(*c.target_file);
    } else if (c.target_fraction) {
        Rng rng(c.target_seed);
        run.program.target = synthetic_target(run.fleet, run.stations, c.horizon, c.slot_hours,
                                              c.scenario, run.hp.soc_limits(), *c.target_fraction, rng);
    } else {
        throw ConfigError("no target profile configured");
    }
    run.program.validate();
    if (run.fleet.empty())
        throw ConfigError("fleet is empty");
    if (run.stations.empty())
        throw ConfigError("no charging stations");
    const auto env = run.environment();
    run.network = network_for(env, c.network);
    run.network.validate();
    return run;
}

RunConfig manifest_of(const RunConfig& config, const ResolvedRun& run) {
    RunConfig m = config;
    m.target = run.program.target;
    m.target_file.reset();
    m.target_fraction.reset();
    if (m.fleet_file)
        m.fleet_file = fs::absolute(*m.fleet_file);
    m.out_dir = fs::absolute(m.out_dir);
    return m;
}

namespace {

constexpr char kMagic[4] = {'D', 'R', 'Q', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw DataError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | b[i];
    return v;
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | b[i];
    return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::size_t get_count(std::istream& in, std::size_t limit) {
    const auto v = get_u64(in);
    if (v > limit)
        throw DataError("checkpoint field out of range");
    return static_cast<std::size_t>(v);
}

} // namespace

void save_checkpoint(std::ostream& out, const NetworkParams& params) {
    const auto& c = params.config;
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, c.input_size);
    put_u64(out, c.hidden.size());
    for (auto w : c.hidden)
        put_u64(out, w);
    put_f64(out, c.dropout_rate);
    put_u64(out, c.dropout_after.size());
    for (auto i : c.dropout_after)
        put_u64(out, i);
    put_u64(out, c.output_size);
    put_u64(out, params.layers.size());
    for (const auto& layer : params.layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index col = 0; col < layer.weights.cols(); ++col)
                put_f64(out, layer.weights(r, col));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
            put_f64(out, layer.bias(r));
    }
    if (!out)
        throw IoError("failed writing checkpoint");
}

void save_checkpoint(const fs::path& path, const NetworkParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    save_checkpoint(out, params);
}

NetworkParams load_checkpoint(std::istream& in) {
    constexpr std::size_t kMaxWidth = std::size_t{1} << 28;
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic))
        throw DataError("not a checkpoint (bad magic)");
    if (const auto v = get_u32(in); v != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(v));
    NetworkConfig c;
    c.input_size = get_count(in, kMaxWidth);
    c.hidden.resize(get_count(in, 4096));
    for (auto& w : c.hidden)
        w = get_count(in, kMaxWidth);
    c.dropout_rate = get_f64(in);
    c.dropout_after.resize(get_count(in, 4096));
    for (auto& i : c.dropout_after)
        i = get_count(in, 4096);
    c.output_size = get_count(in, kMaxWidth);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint config invalid: ") + e.what());
    }
    if (get_count(in, 4097) != c.hidden.size() + 1)
        throw DataError("checkpoint layer count does not match its config");

    NetworkParams p{c, {}};
    std::size_t fan_in = c.input_size;
    auto read_layer = [&](std::size_t fan_out) {
        DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out)};
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index col = 0; col < layer.weights.cols(); ++col)
                layer.weights(r, col) = get_f64(in);
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
            layer.bias(r) = get_f64(in);
        p.layers.push_back(std::move(layer));
        fan_in = fan_out;
    };
    for (auto w : c.hidden)
        read_layer(w);
    read_layer(c.output_size);
    if (!p.all_finite())
        throw DataError("checkpoint holds non-finite weights");
    return p;
}

NetworkParams load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFoundError("checkpoint not found: " + path.string());
    return load_checkpoint(in);
}

std::string describe_shape(const NetworkConfig& c) {
    std::string s = std::to_string(c.input_size);
    for (auto w : c.hidden)
        s += "->" + std::to_string(w);
    return s + "->" + std::to_string(c.output_size);
}

void check_shape(const NetworkParams& params, const NetworkConfig& expected) {
    const auto& c = params.config;
    if (c.input_size != expected.input_size || c.hidden != expected.hidden ||
        c.output_size != expected.output_size)
        throw ShapeError("checkpoint network " + describe_shape(c) +
                         " does not match configured network " + describe_shape(expected));
}

void write_history_csv(std::ostream& out, const TrainingHistory& h) {
    out << "episode,reward,loss,epsilon\n";
    for (std::size_t e = 0; e < h.episode_rewards.size(); ++e)
        out << e << ',' << format_double(h.episode_rewards[e]) << ','
            << format_double(h.episode_losses[e]) << ',' << format_double(h.episode_epsilons[e])
            << '\n';
}

void write_curves_csv(std::ostream& out, const std::vector<double>& target,
                      const std::vector<double>& achieved, const std::vector<double>& baseline) {
    if (achieved.size() != target.size() || baseline.size() != target.size())
        throw ArgumentError("curves differ in length");
    out << "slot,target_kwh,achieved_kwh,baseline_kwh\n";
    for (std::size_t t = 0; t < target.size(); ++t)
        out << t << ',' << format_double(target[t]) << ',' << format_double(achieved[t]) << ','
            << format_double(baseline[t]) << '\n';
}

void write_schedule_csv(std::ostream& out, const Environment& env, const ScheduleState& schedule) {
    const auto kind = kind_for(env.program().scenario);
    out << "station,timeslot,ev_id,kind,energy_kwh\n";
    for (std::size_t i = 0; i < schedule.stations(); ++i)
        for (std::size_t t = 0; t < schedule.horizon(); ++t)
            if (const int id = schedule.at(i, t); id != 0)
                out << i << ',' << t << ',' << id << ',' << to_string(kind) << ','
                    << format_double(env.assignment_energy(env.vehicle(id), env.stations()[i], kind))
                    << '\n';
}

void write_report(std::ostream& out, const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; };
    out << "pearson=" << opt(r.pearson) << '\n'
        << "baseline_pearson=" << opt(r.baseline_pearson) << '\n'
        << "max_deviation_kwh=" << format_double(r.max_deviation) << '\n'
        << "per_slot_deviation_kwh=" << join(r.per_slot_deviation) << '\n'
        << "distance_kwh=" << format_double(r.distance) << '\n'
        << "baseline_distance_kwh=" << format_double(r.baseline_distance) << '\n'
        << "oracle_distance_kwh=" << opt(r.oracle_distance) << '\n'
        << "episodes=" << r.episode_rewards.size() << '\n'
        << "episode_rewards=" << join(r.episode_rewards) << '\n'
        << "truncated=" << (r.truncated ? "true" : "false") << '\n';
    out << "allocation_histogram=";
    if (r.allocation_histogram) {
        bool first = true;
        for (const auto& [bucket, frac] : *r.allocation_histogram) {
            out << (first ? "" : ",") << bucket << ':' << format_double(frac);
            first = false;
        }
    } else {
        out << "undefined";
    }
    out << '\n';
}

} // namespace evdr
