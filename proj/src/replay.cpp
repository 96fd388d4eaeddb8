#include "mmcl/replay.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace mmcl {

void ReservoirBuffer::observe(BufferEntry entry) {
    ++seen_;
    if (capacity_ == 0) return;
    if (entries_.size() < capacity_) {
        entries_.push_back(std::move(entry));
        return;
    }
    const std::size_t j = rng_.uniform_index(static_cast<std::size_t>(seen_));
    if (j < capacity_) entries_[j] = std::move(entry);
}

std::vector<const BufferEntry*> ReservoirBuffer::sample(std::size_t k,
                                                        Rng& rng) const {
    std::vector<const BufferEntry*> batch;
    if (entries_.empty() || k == 0) return batch;
    batch.reserve(k);
    if (k > entries_.size()) {
        for (std::size_t i = 0; i < k; ++i)
            batch.push_back(&entries_[rng.uniform_index(entries_.size())]);
        return batch;
    }
    // Partial Fisher-Yates over index positions.
    std::vector<std::size_t> idx(entries_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(idx.size() - i);
        std::swap(idx[i], idx[j]);
        batch.push_back(&entries_[idx[i]]);
    }
    return batch;
}

namespace {

using nlohmann::ordered_json;

void write_vec(std::ostream& os, const std::vector<double>& v) {
    for (double x : v) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
        unsigned char b[8];
        for (int j = 0; j < 8; ++j)
            b[j] = static_cast<unsigned char>((bits >> (8 * j)) & 0xff);
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_vec(std::istream& is, std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        if (!is.read(reinterpret_cast<char*>(b), 8))
            throw std::runtime_error("truncated buffer checkpoint blob");
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j)
            bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
        v[i] = std::bit_cast<double>(bits);
    }
}

}  // namespace

void ReservoirBuffer::save(const std::filesystem::path& prefix) const {
    ordered_json j;
    j["capacity"] = capacity_;
    j["seen_count"] = seen_;
    j["rng_state"] = rng_.save_state();
    j["entry_count"] = entries_.size();
    if (!entries_.empty()) {
        j["dim_audio"] = entries_[0].audio.size();
        j["dim_visual"] = entries_[0].visual.size();
        j["num_classes"] = entries_[0].z_av.size();
        j["labels"] = ordered_json::array();
        for (const auto& e : entries_) j["labels"].push_back(e.label);
    }
    std::ofstream mos(prefix.string() + ".json");
    if (!mos)
        throw std::runtime_error("cannot write " + prefix.string() + ".json");
    mos << j.dump(2) << "\n";

    std::ofstream bos(prefix.string() + ".bin", std::ios::binary);
    if (!bos)
        throw std::runtime_error("cannot write " + prefix.string() + ".bin");
    for (const auto& e : entries_) {
        write_vec(bos, e.audio);
        write_vec(bos, e.visual);
        write_vec(bos, e.z_a);
        write_vec(bos, e.z_v);
        write_vec(bos, e.z_av);
    }
}

ReservoirBuffer ReservoirBuffer::load(const std::filesystem::path& prefix) {
    std::ifstream mis(prefix.string() + ".json");
    if (!mis)
        throw std::runtime_error("cannot open " + prefix.string() + ".json");
    ordered_json j = ordered_json::parse(mis);

    ReservoirBuffer buf(j.at("capacity").get<std::size_t>(), 0);
    buf.seen_ = j.at("seen_count").get<std::uint64_t>();
    buf.rng_.load_state(j.at("rng_state").get<std::string>());
    const std::size_t count = j.at("entry_count").get<std::size_t>();
    if (count == 0) return buf;

    const std::size_t da = j.at("dim_audio").get<std::size_t>();
    const std::size_t dv = j.at("dim_visual").get<std::size_t>();
    const std::size_t nc = j.at("num_classes").get<std::size_t>();
    const auto labels = j.at("labels").get<std::vector<int>>();
    if (labels.size() != count)
        throw std::runtime_error("buffer checkpoint label count mismatch");

    std::ifstream bis(prefix.string() + ".bin", std::ios::binary);
    if (!bis)
        throw std::runtime_error("cannot open " + prefix.string() + ".bin");
    buf.entries_.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& e = buf.entries_[i];
        e.label = labels[i];
        read_vec(bis, e.audio, da);
        read_vec(bis, e.visual, dv);
        read_vec(bis, e.z_a, nc);
        read_vec(bis, e.z_v, nc);
        read_vec(bis, e.z_av, nc);
    }
    return buf;
}

}  // namespace mmcl
