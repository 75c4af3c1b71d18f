#include "generallog/synth.hpp"

#include "generallog/config.hpp"
#include "generallog/errors.hpp"
#include "generallog/random.hpp"
#include "generallog/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace generallog::synth {

namespace {

// Shared pool: events every system in the family emits.
enum Shared {
    kOpen, kAuth, kAlloc, kReceiving, kReceived, kResponder, kStored, kVerify, kServe, kRead,
    kDelete, kDeleted, kReplicate, kReplicaDone, kCommit, kLease, kQuota, kHeartbeat, kClose,
    kSharedCount
};

constexpr const char* kSharedText[kSharedCount] = {
    "Session opened for client {ip} with protocol version {n}",
    "Authentication succeeded for account {user} using token {hex}",
    "Allocating new block {blk} of size {n} bytes",
    "Receiving block {blk} src: {ip} dest: {ip}",
    "Received block {blk} of size {n} from {ip}",
    "PacketResponder {n} for block {blk} terminating",
    "Namenode updated blockMap: {ip} is added to {blk} size {n}",
    "Verification succeeded for {blk}",
    "Served block {blk} to client {ip}",
    "Read request completed for file {path} in {n} ms",
    "Deleting block {blk} file {path}",
    "Block deletion acknowledged for {blk} by datanode {ip}",
    "Replication scheduled for {blk} to datanodes {ip} {ip}",
    "Replica transfer of {blk} finished in {n} ms",
    "Transaction {n} committed with {n} operations",
    "Lease renewed for holder {user} on path {path}",
    "Quota check passed for directory {path}",
    "Heartbeat received from datanode {ip} with {n} blocks",
    "Session closed for client {ip} after {n} ms",
};

// Alternative wordings a sibling system uses for some shared events.
struct Variant {
    Shared of;
    const char* text;
};
constexpr Variant kVariants[] = {
    {kOpen, "Session opened for remote client {ip} with protocol version {n}"},
    {kServe, "Served cached block {blk} to client {ip}"},
    {kCommit, "Transaction {n} committed successfully with {n} operations"},
    {kClose, "Session closed for remote client {ip} after {n} ms"},
};

constexpr const char* kSharedAnomalies[] = {
    "Exception while receiving block {blk} connection reset by peer {ip}",
    "Failed to transfer block {blk} to {ip} checksum error detected",
    "Write pipeline aborted for block {blk} after {n} retries timeout",
    "Corrupt replica reported for block {blk} on datanode {ip}",
    "Lost heartbeat from datanode {ip} marking node dead",
    "Permission denied for account {user} on path {path} access error",
    "Disk failure detected on volume {path} fatal io error",
    "Connection refused by namenode {ip} retry limit exceeded",
};

// System-specific events with vocabulary absent from the shared pool.
constexpr const char* kProprietaryNormal[] = {
    "Raft leader elected term {n} voter quorum {n}",
    "Shard rebalancer migrated partition {n} onto tablet {hex}",
    "Bloom filter rebuilt sstable {n} false positive rate {n}",
    "Gossip digest exchanged peer {ip} generation {n}",
    "Compaction cycle merged {n} segments level {n}",
    "Snapshot manifest uploaded bucket {user} object {hex}",
    "Vector clock advanced epoch {n} shard {n}",
    "Tombstone sweeper purged {n} keys keyspace {user}",
};

// System-specific failures: new subjects, but worded like failures anywhere.
constexpr const char* kProprietaryAnomalies[] = {
    "Raft election failed term {n} quorum lost error",
    "Tablet split aborted partition {n} fatal exception",
    "Gossip peer {ip} unreachable timeout exceeded error",
    "Sstable segment {n} corrupt checksum failure detected",
    "Snapshot upload failed bucket {user} access denied",
    "Compaction stalled level {n} disk failure refused",
};

constexpr const char* kUsers[] = {"alice", "bruno", "chen", "dara", "emeka", "farah", "goran", "hana"};
constexpr const char* kDirs[] = {"data", "logs", "tmp", "warehouse", "staging", "archive"};

struct Event {
    std::string text;
    bool anomalous = false;
};

class Filler {
public:
    Filler(Rng& rng, int subnet) : rng_(rng), subnet_(subnet) {}

    std::string fill(std::string_view tmpl) {
        std::string out;
        for (std::size_t i = 0; i < tmpl.size(); ++i) {
            if (tmpl[i] != '{') {
                out += tmpl[i];
                continue;
            }
            const auto close = tmpl.find('}', i);
            const auto name = tmpl.substr(i + 1, close - i - 1);
            out += value(name);
            i = close;
        }
        return out;
    }

private:
    std::string value(std::string_view name) {
        char buf[64];
        if (name == "ip") {
            std::snprintf(buf, sizeof buf, "10.%d.%d.%d:%d", subnet_, static_cast<int>(rng_.below(256)),
                          static_cast<int>(rng_.below(256)), 50000 + static_cast<int>(rng_.below(100)));
        } else if (name == "blk") {
            const long long id = static_cast<long long>(rng_.next() >> 2) * (rng_.chance(0.5) ? 1 : -1);
            std::snprintf(buf, sizeof buf, "blk_%lld", id);
        } else if (name == "n") {
            std::snprintf(buf, sizeof buf, "%d", static_cast<int>(rng_.below(5000)));
        } else if (name == "hex") {
            std::snprintf(buf, sizeof buf, "0x%08llx", static_cast<unsigned long long>(rng_.next() & 0xffffffffULL));
        } else if (name == "user") {
            return kUsers[rng_.below(std::size(kUsers))];
        } else if (name == "path") {
            std::snprintf(buf, sizeof buf, "/%s/%s/part-%05d", kDirs[rng_.below(std::size(kDirs))],
                          kUsers[rng_.below(std::size(kUsers))], static_cast<int>(rng_.below(100000)));
        } else {
            throw Error(ErrorCode::InconsistentSpec, "unknown placeholder {" + std::string(name) + "}");
        }
        return buf;
    }

    Rng& rng_;
    int subnet_;
};

// One normal session of a randomly chosen workflow, as shared-pool event ids.
std::vector<Shared> workflow(Rng& rng) {
    std::vector<Shared> out{kOpen, kAuth};
    const auto repeat = [&](std::initializer_list<Shared> group, std::size_t times) {
        for (std::size_t k = 0; k < times; ++k) out.insert(out.end(), group);
    };
    switch (rng.below(5)) {
        case 0:  // write pipeline
            repeat({kAlloc, kReceiving, kReceived, kResponder, kStored}, 1 + rng.below(2));
            break;
        case 1:  // read
            out.push_back(kVerify);
            repeat({kServe, kRead}, 1 + rng.below(3));
            break;
        case 2:  // delete
            repeat({kDelete, kDeleted}, 1 + rng.below(3));
            break;
        case 3:  // replication
            repeat({kReplicate, kReplicaDone}, 1 + rng.below(2));
            out.push_back(kHeartbeat);
            break;
        default:  // metadata transaction
            out.push_back(kLease);
            repeat({kCommit}, 1 + rng.below(3));
            out.push_back(kQuota);
            break;
    }
    if (rng.chance(0.3)) out.insert(out.begin() + 1 + static_cast<std::ptrdiff_t>(rng.below(out.size() - 1)), kHeartbeat);
    out.push_back(kClose);
    return out;
}

// Inserts `block` at a random position strictly inside the session.
void insert_block(Rng& rng, std::vector<Event>& events, std::vector<Event> block) {
    const auto at = 1 + rng.below(events.size() - 1);
    events.insert(events.begin() + static_cast<std::ptrdiff_t>(at), block.begin(), block.end());
}

std::vector<Event> session_events(Rng& rng, Filler& fill, bool anomalous, SessionKind kind, double variant_rate) {
    const auto ids = workflow(rng);
    std::vector<const char*> wording(kSharedCount);
    for (int s = 0; s < kSharedCount; ++s) wording[s] = kSharedText[s];
    if (variant_rate > 0.0) {
        for (const auto& v : kVariants) {
            if (rng.chance(variant_rate)) wording[v.of] = v.text;
        }
    }
    std::vector<Event> events;
    for (const auto id : ids) events.push_back({fill.fill(wording[id]), false});

    if (kind == SessionKind::Proprietary) {
        const auto n = 1 + rng.below(3);
        for (std::size_t k = 0; k < n; ++k) {
            insert_block(rng, events, {{fill.fill(kProprietaryNormal[rng.below(std::size(kProprietaryNormal))]), false}});
        }
    }
    if (anomalous) {
        std::vector<Event> block;
        const auto n = 1 + rng.below(2);
        for (std::size_t k = 0; k < n; ++k) {
            const char* t = kind == SessionKind::Proprietary
                                ? kProprietaryAnomalies[rng.below(std::size(kProprietaryAnomalies))]
                                : kSharedAnomalies[rng.below(std::size(kSharedAnomalies))];
            block.push_back({fill.fill(t), true});
        }
        // A failure aborts the rest of the workflow; only the session close follows it.
        const auto at = 1 + rng.below(events.size() - 1);
        events.erase(events.begin() + static_cast<std::ptrdiff_t>(at), events.end() - 1);
        events.insert(events.end() - 1, block.begin(), block.end());
    }
    return events;
}

std::string timestamp(std::uint64_t millis) {
    const auto s = millis / 1000;
    char buf[40];
    std::snprintf(buf, sizeof buf, "2026-03-%02lluT%02llu:%02llu:%02llu.%03llu",
                  static_cast<unsigned long long>(1 + s / 86400 % 28), static_cast<unsigned long long>(s / 3600 % 24),
                  static_cast<unsigned long long>(s / 60 % 60), static_cast<unsigned long long>(s % 60),
                  static_cast<unsigned long long>(millis % 1000));
    return buf;
}

// Exactly `positives` ones among `count` slots, shuffled.
std::vector<int> labels_with(Rng& rng, std::size_t count, std::size_t positives) {
    std::vector<int> out(count, 0);
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(positives), 1);
    rng.shuffle(out);
    return out;
}

SystemLogs emit(Rng& rng, const std::string& prefix, int subnet, const std::vector<int>& labels,
                const std::vector<SessionKind>& kinds, double variant_rate) {
    SystemLogs out;
    Filler fill(rng, subnet);
    std::uint64_t clock = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%s-%06zu", prefix.c_str(), i + 1);
        out.sessions.push_back({id, labels[i], kinds[i]});
        for (const auto& e : session_events(rng, fill, labels[i] == 1, kinds[i], variant_rate)) {
            clock += 1 + rng.below(40);
            out.lines.push_back(timestamp(clock) + " " + id + " " + (e.anomalous ? "ERROR" : "INFO") + " " + e.text);
        }
    }
    return out;
}

std::size_t rounded(double x) { return static_cast<std::size_t>(std::llround(x)); }

}  // namespace

void SynthSpec::validate() const {
    const auto bad = [](const std::string& what) { return Error(ErrorCode::InconsistentSpec, what); };
    if (source_count == 0 || target_count == 0) throw bad("source and target counts must be positive");
    if (!(anomaly_rate >= 0.0 && anomaly_rate < 1.0)) throw bad("anomaly rate must lie in [0, 1)");
    if (!(proprietary_fraction >= 0.0 && proprietary_fraction <= 1.0)) throw bad("proprietary fraction must lie in [0, 1]");
    if (!(variant_rate >= 0.0 && variant_rate <= 1.0)) throw bad("variant rate must lie in [0, 1]");
    if (!proprietary_pool && proprietary_fraction > 0.0) {
        throw bad("proprietary sessions requested but the proprietary pool is disabled");
    }
}

SynthCorpus synth_generate(std::uint64_t seed, const SynthSpec& spec) {
    spec.validate();
    Rng rng(seed);
    SynthCorpus out;

    const auto source_labels = labels_with(rng, spec.source_count, rounded(spec.anomaly_rate * double(spec.source_count)));
    out.source = emit(rng, "src", 1, source_labels,
                      std::vector<SessionKind>(spec.source_count, SessionKind::General), 0.0);

    const std::size_t n_prop = rounded(spec.proprietary_fraction * double(spec.target_count));
    const std::size_t n_general = spec.target_count - n_prop;
    const std::size_t anomalies = rounded(spec.anomaly_rate * double(spec.target_count));
    const std::size_t prop_anomalies = std::min(n_prop, rounded(spec.anomaly_rate * double(n_prop)));
    const std::size_t general_anomalies = anomalies - prop_anomalies;
    if (general_anomalies > n_general) throw Error(ErrorCode::InconsistentSpec, "too many anomalies for the target size");

    // Build the target as (kind, label) pairs, then shuffle the session order.
    std::vector<std::pair<SessionKind, int>> plan;
    for (const int y : labels_with(rng, n_general, general_anomalies)) plan.emplace_back(SessionKind::General, y);
    for (const int y : labels_with(rng, n_prop, prop_anomalies)) plan.emplace_back(SessionKind::Proprietary, y);
    rng.shuffle(plan);
    std::vector<int> target_labels;
    std::vector<SessionKind> kinds;
    for (const auto& [k, y] : plan) {
        kinds.push_back(k);
        target_labels.push_back(y);
    }
    out.target = emit(rng, "tgt", 2, target_labels, kinds, spec.variant_rate);
    return out;
}

void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus, std::uint64_t seed) {
    const auto write_log = [&](const std::string& name, const SystemLogs& logs) {
        std::ostringstream lines, labels;
        for (const auto& l : logs.lines) lines << l << '\n';
        labels << "SessionId,Label\n";
        for (const auto& s : logs.sessions) labels << s.id << ',' << (s.label == 1 ? "Anomaly" : "Normal") << '\n';
        text::write_file(dir / (name + ".log"), lines.str());
        text::write_file(dir / (name + "_labels.csv"), labels.str());
    };
    write_log("source", corpus.source);
    write_log("target", corpus.target);

    std::ostringstream kinds;
    kinds << "SessionId,Kind\n";
    for (const auto& s : corpus.target.sessions) {
        kinds << s.id << ',' << (s.kind == SessionKind::General ? "General" : "Proprietary") << '\n';
    }
    text::write_file(dir / "target_kinds.csv", kinds.str());

    config::PipelineConfig cfg;
    cfg.seed = seed;
    cfg.train.seed = seed;
    for (auto* side : {&cfg.source, &cfg.target}) {
        side->format = "session";
        side->header_regex = kHeaderRegex;
        side->header_fields = text::split(kHeaderFields, ',');
        side->session_regex = kSessionRegex;
    }
    cfg.source.log = "source.log";
    cfg.source.labels = "source_labels.csv";
    cfg.target.log = "target.log";
    cfg.target.labels = "target_labels.csv";
    cfg.llm_mock = true;
    text::write_file(dir / "generallog.conf", config::render_config(cfg));
}

}  // namespace generallog::synth
