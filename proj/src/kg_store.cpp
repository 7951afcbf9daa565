#include "ppt/kg_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ppt {

namespace {

[[noreturn]] void fail(const std::string& path, size_t line, const std::string& what) {
    std::ostringstream os;
    os << path << ":" << line << ": " << what;
    throw KgError(os.str());
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    for (;;) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

int64_t parse_int(const std::string& field, const std::string& path, size_t line) {
    int64_t value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || field.empty())
        fail(path, line, "expected integer, got \"" + field + "\"");
    return value;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw KgError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

// "name\tid" lines; ids must form a dense 0..n-1 range.
std::vector<std::string> load_name_map(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<std::string> names;
    std::vector<bool> seen;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_tabs(lines[i]);
        if (fields.size() != 2)
            fail(path, i + 1, "expected \"name\\tid\"");
        const int64_t id = parse_int(fields[1], path, i + 1);
        if (id < 0) fail(path, i + 1, "negative id");
        const auto idx = static_cast<size_t>(id);
        if (idx >= names.size()) {
            names.resize(idx + 1);
            seen.resize(idx + 1, false);
        }
        if (seen[idx]) fail(path, i + 1, "duplicate id " + fields[1]);
        names[idx] = fields[0];
        seen[idx] = true;
    }
    for (size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw KgError(path + ": id " + std::to_string(i) +
                          " missing (ids must be dense)");
    return names;
}

void load_split(const std::string& path, int64_t granularity,
                size_t entity_count, size_t relation_count,
                std::vector<Quadruple>& out) {
    const auto lines = read_lines(path);
    size_t loaded = 0;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_tabs(lines[i]);
        if (fields.size() != 4 && fields.size() != 5)
            fail(path, i + 1, "expected 4 or 5 tab-separated fields, got " +
                                  std::to_string(fields.size()));
        const int64_t s = parse_int(fields[0], path, i + 1);
        const int64_t r = parse_int(fields[1], path, i + 1);
        const int64_t o = parse_int(fields[2], path, i + 1);
        const int64_t t = parse_int(fields[3], path, i + 1);
        if (s < 0 || static_cast<size_t>(s) >= entity_count)
            fail(path, i + 1, "subject id " + fields[0] + " out of vocabulary");
        if (o < 0 || static_cast<size_t>(o) >= entity_count)
            fail(path, i + 1, "object id " + fields[2] + " out of vocabulary");
        if (r < 0 || static_cast<size_t>(r) >= relation_count)
            fail(path, i + 1, "relation id " + fields[1] + " out of vocabulary");
        if (t < 0) fail(path, i + 1, "negative timestamp");
        if (t % granularity != 0)
            fail(path, i + 1, "timestamp " + fields[3] + " not divisible by granularity " +
                                  std::to_string(granularity));
        out.push_back(Quadruple{static_cast<EntityId>(s), static_cast<RelationId>(r),
                                static_cast<EntityId>(o), t / granularity});
        ++loaded;
    }
    if (loaded == 0) throw KgError(path + ": empty split");
}

void sort_quads(std::vector<Quadruple>& quads) {
    std::sort(quads.begin(), quads.end(), [](const Quadruple& a, const Quadruple& b) {
        return std::tie(a.t, a.subject, a.relation, a.object) <
               std::tie(b.t, b.subject, b.relation, b.object);
    });
}

Timestamp min_t(const std::vector<Quadruple>& quads) {
    Timestamp m = quads.front().t;
    for (const auto& q : quads) m = std::min(m, q.t);
    return m;
}

Timestamp max_t(const std::vector<Quadruple>& quads) {
    Timestamp m = quads.front().t;
    for (const auto& q : quads) m = std::max(m, q.t);
    return m;
}

}  // namespace

TemporalKG TemporalKG::load(const std::string& train_path,
                            const std::string& valid_path,
                            const std::string& test_path,
                            const std::string& entity_map_path,
                            const std::string& relation_map_path,
                            int64_t granularity) {
    if (granularity <= 0) throw KgError("granularity must be positive");

    TemporalKG kg;
    kg.granularity_ = granularity;
    kg.entity_names_ = load_name_map(entity_map_path);
    kg.relation_names_ = load_name_map(relation_map_path);

    std::vector<Quadruple> train, valid, test;
    load_split(train_path, granularity, kg.entity_names_.size(),
               kg.relation_names_.size(), train);
    load_split(valid_path, granularity, kg.entity_names_.size(),
               kg.relation_names_.size(), valid);
    load_split(test_path, granularity, kg.entity_names_.size(),
               kg.relation_names_.size(), test);

    // Extrapolation setting: train < valid < test, strictly.
    if (max_t(train) >= min_t(valid))
        throw KgError(valid_path + ": split-order violation (valid timestamp " +
                      std::to_string(min_t(valid) * granularity) +
                      " not after all train timestamps)");
    if (max_t(valid) >= min_t(test))
        throw KgError(test_path + ": split-order violation (test timestamp " +
                      std::to_string(min_t(test) * granularity) +
                      " not after all valid timestamps)");

    sort_quads(train);
    sort_quads(valid);
    sort_quads(test);

    kg.quads_ = std::move(train);
    kg.train_end_ = kg.quads_.size();
    kg.quads_.insert(kg.quads_.end(), valid.begin(), valid.end());
    kg.valid_end_ = kg.quads_.size();
    kg.quads_.insert(kg.quads_.end(), test.begin(), test.end());

    kg.by_subject_.resize(kg.entity_names_.size());
    kg.by_object_.resize(kg.entity_names_.size());
    kg.by_relation_.resize(kg.relation_names_.size());
    for (size_t i = 0; i < kg.quads_.size(); ++i) {
        const auto& q = kg.quads_[i];
        kg.by_subject_[q.subject].push_back(static_cast<uint32_t>(i));
        kg.by_object_[q.object].push_back(static_cast<uint32_t>(i));
        kg.by_relation_[q.relation].push_back(static_cast<uint32_t>(i));
    }
    return kg;
}

std::pair<size_t, size_t> TemporalKG::split_range(Split split) const {
    switch (split) {
        case Split::Train: return {0, train_end_};
        case Split::Valid: return {train_end_, valid_end_};
        case Split::Test: return {valid_end_, quads_.size()};
    }
    throw KgError("unknown split");
}

std::vector<Triple> TemporalKG::snapshot(Timestamp t) const {
    const auto first = std::lower_bound(
        quads_.begin(), quads_.end(), t,
        [](const Quadruple& q, Timestamp v) { return q.t < v; });
    const auto last = std::upper_bound(
        quads_.begin(), quads_.end(), t,
        [](Timestamp v, const Quadruple& q) { return v < q.t; });
    std::vector<Triple> triples;
    triples.reserve(static_cast<size_t>(last - first));
    for (auto it = first; it != last; ++it)
        triples.push_back(Triple{it->subject, it->relation, it->object});
    return triples;
}

std::vector<double> TemporalKG::entity_frequency() const {
    std::vector<double> weights(entity_names_.size(), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < train_end_; ++i) {
        const auto& q = quads_[i];
        weights[q.subject] += 1.0;
        total += 1.0;
        if (q.object != q.subject) {
            weights[q.object] += 1.0;
            total += 1.0;
        }
    }
    if (total > 0.0)
        for (auto& w : weights) w /= total;
    return weights;
}

void TemporalKG::dump(const std::string& train_path, const std::string& valid_path,
                      const std::string& test_path,
                      const std::string& entity_map_path,
                      const std::string& relation_map_path) const {
    auto write_split = [&](const std::string& path, Split split) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw KgError("cannot write " + path);
        auto [begin, end] = split_range(split);
        for (size_t i = begin; i < end; ++i) {
            const auto& q = quads_[i];
            out << q.subject << '\t' << q.relation << '\t' << q.object << '\t'
                << q.t * granularity_ << '\n';
        }
    };
    auto write_map = [&](const std::string& path, const std::vector<std::string>& names) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw KgError("cannot write " + path);
        for (size_t i = 0; i < names.size(); ++i)
            out << names[i] << '\t' << i << '\n';
    };
    write_split(train_path, Split::Train);
    write_split(valid_path, Split::Valid);
    write_split(test_path, Split::Test);
    write_map(entity_map_path, entity_names_);
    write_map(relation_map_path, relation_names_);
}

}  // namespace ppt
