#include "spikeloop/network.hpp"

#include "spikeloop/errors.hpp"
#include "spikeloop/kv_text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace spikeloop {

namespace {

constexpr std::string_view kNeuronPrefix = "neuron.";

std::vector<DefaultsField> neuron_fields()
{
    auto all = defaults_fields();
    std::erase_if(all, [](const DefaultsField& f) { return !f.key.starts_with(kNeuronPrefix); });
    return all;
}

} // namespace

std::uint8_t NetworkSpec::add_population(const std::string& name, int size)
{
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw InvalidParameterError(fmt::format("invalid population name '{}'", name));
    if (find_population(name))
        throw InvalidParameterError(fmt::format("duplicate population '{}'", name));
    if (size < 1 || size > 256)
        throw RangeError(fmt::format("population '{}' size {} outside [1, 256]", name, size));
    if (populations.size() >= 256)
        throw RangeError("more than 256 populations");
    populations.push_back({name, size});
    return static_cast<std::uint8_t>(populations.size() - 1);
}

void NetworkSpec::add_edge(const std::string& src_pop, int src_idx, const std::string& dst_pop,
                           int dst_idx, Channel channel, double weight)
{
    routing.add(address(src_pop, src_idx), {address(dst_pop, dst_idx), channel, weight});
}

void NetworkSpec::add_port(PortDirection dir, const std::string& name, const std::string& population)
{
    if (find_port(name))
        throw InvalidParameterError(fmt::format("duplicate port '{}'", name));
    population_id(population);
    ports.push_back({dir, name, population});
}

void NetworkSpec::add_drive(const std::string& population, int neuron, double rate_hz)
{
    address(population, neuron);
    if (!(rate_hz > 0))
        throw InvalidParameterError("drive rate must be > 0");
    drives.push_back({population, neuron, rate_hz});
}

std::optional<std::uint8_t> NetworkSpec::find_population(const std::string& name) const
{
    for (std::size_t i = 0; i < populations.size(); ++i)
        if (populations[i].name == name)
            return static_cast<std::uint8_t>(i);
    return std::nullopt;
}

std::uint8_t NetworkSpec::population_id(const std::string& name) const
{
    if (auto id = find_population(name))
        return *id;
    throw RangeError(fmt::format("unknown population '{}'", name));
}

Address NetworkSpec::address(const std::string& population, int neuron) const
{
    const auto id = population_id(population);
    return one_hot_encode(neuron, id, populations[id].size);
}

const Port* NetworkSpec::find_port(const std::string& name) const
{
    for (const auto& p : ports)
        if (p.name == name)
            return &p;
    return nullptr;
}

bool NetworkSpec::is_virtual(std::uint8_t population) const
{
    const auto& name = populations.at(population).name;
    for (const auto& p : ports)
        if (p.direction == PortDirection::In && p.population == name)
            return true;
    for (const auto& d : drives)
        if (d.population == name)
            return true;
    return false;
}

int NetworkSpec::total_neurons() const
{
    int n = 0;
    for (const auto& p : populations)
        n += p.size;
    return n;
}

void NetworkSpec::validate() const
{
    auto check = [&](Address a) {
        if (a.population >= populations.size() || a.neuron >= populations[a.population].size)
            throw InvalidParameterError(
                fmt::format("route references missing neuron ({},{})", a.population, a.neuron));
    };
    for (const auto& [src, list] : routing.entries()) {
        check(src);
        for (const auto& s : list) {
            check(s.target);
            if (is_virtual(s.target.population))
                throw InvalidParameterError(fmt::format(
                    "route targets externally driven population '{}'",
                    populations[s.target.population].name));
        }
    }
    std::set<std::string> names;
    for (const auto& p : ports) {
        if (!names.insert(p.name).second)
            throw InvalidParameterError(fmt::format("duplicate port '{}'", p.name));
        population_id(p.population);
    }
    for (const auto& d : drives)
        address(d.population, d.neuron);
    for (const auto& [pop, params] : neuron_params) {
        population_id(pop);
        params.validate();
    }
}

void write_network(std::ostream& out, const NetworkSpec& net)
{
    for (const auto& p : net.populations)
        out << fmt::format("population {} {}\n", p.name, p.size);
    for (const auto& [src, list] : net.routing.entries())
        for (const auto& s : list)
            out << fmt::format("edge {} {} {} {} {} {}\n", net.populations[src.population].name,
                               src.neuron, net.populations[s.target.population].name,
                               s.target.neuron, channel_name(s.channel), s.weight);
    for (const auto& p : net.ports)
        out << fmt::format("port {} {} {}\n", p.direction == PortDirection::In ? "in" : "out",
                           p.name, p.population);
    for (const auto& d : net.drives)
        out << fmt::format("drive {} {} {}\n", d.population, d.neuron, d.rate_hz);
    const auto fields = neuron_fields();
    for (const auto& [pop, params] : net.neuron_params) {
        ModelDefaults holder;
        holder.neuron = params;
        for (const auto& f : fields)
            out << fmt::format("param {} {} {}\n", pop, f.key.substr(kNeuronPrefix.size()),
                               f.get(holder));
    }
}

NetworkSpec read_network(std::istream& in)
{
    NetworkSpec net;
    std::map<std::string, ModelDefaults> params;
    const auto fields = neuron_fields();
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.resize(hash);
        std::istringstream ls(raw);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;)
            tok.push_back(t);
        if (tok.empty())
            continue;
        auto bad = [&](const std::string& why) {
            return ConfigError(tok[0], line_no, fmt::format("network: {}", why));
        };
        try {
            if (tok[0] == "population" && tok.size() == 3) {
                net.add_population(tok[1], static_cast<int>(parse_int(tok[2], "size", line_no)));
            } else if (tok[0] == "edge" && tok.size() == 7) {
                net.add_edge(tok[1], static_cast<int>(parse_int(tok[2], "srcIdx", line_no)), tok[3],
                             static_cast<int>(parse_int(tok[4], "dstIdx", line_no)),
                             parse_channel(tok[5]), parse_double(tok[6], "weight", line_no));
            } else if (tok[0] == "port" && tok.size() == 4) {
                if (tok[1] != "in" && tok[1] != "out")
                    throw bad("port direction must be 'in' or 'out'");
                net.add_port(tok[1] == "in" ? PortDirection::In : PortDirection::Out, tok[2], tok[3]);
            } else if (tok[0] == "drive" && tok.size() == 4) {
                net.add_drive(tok[1], static_cast<int>(parse_int(tok[2], "neuron", line_no)),
                              parse_double(tok[3], "rate", line_no));
            } else if (tok[0] == "param" && tok.size() == 4) {
                const std::string key = std::string(kNeuronPrefix) + tok[2];
                auto it = std::find_if(fields.begin(), fields.end(),
                                       [&](const auto& f) { return f.key == key; });
                if (it == fields.end())
                    throw bad(fmt::format("unknown neuron parameter '{}'", tok[2]));
                it->set(params[tok[1]], parse_double(tok[3], key, line_no));
            } else {
                throw bad(fmt::format("unrecognised record '{}'", raw));
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw bad(e.what());
        }
    }
    for (auto& [pop, holder] : params)
        net.neuron_params[pop] = holder.neuron;
    try {
        net.validate();
    } catch (const Error& e) {
        throw ConfigError("", 0, fmt::format("network: {}", e.what()));
    }
    return net;
}

void merge_network(NetworkSpec& into, const NetworkSpec& part)
{
    for (const auto& p : part.populations)
        into.add_population(p.name, p.size);
    for (const auto& [src, list] : part.routing.entries())
        for (const auto& s : list)
            into.add_edge(part.populations[src.population].name, src.neuron,
                          part.populations[s.target.population].name, s.target.neuron, s.channel,
                          s.weight);
    for (const auto& p : part.ports)
        into.add_port(p.direction, p.name, p.population);
    for (const auto& d : part.drives)
        into.add_drive(d.population, d.neuron, d.rate_hz);
    for (const auto& [pop, params] : part.neuron_params)
        into.neuron_params[pop] = params;
}

} // namespace spikeloop
