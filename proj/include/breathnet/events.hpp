#pragma once

#include <map>
#include <string>

namespace breathnet {

// Process-wide event counters for rare numeric/IO events (cutoff clamps,
// probability floors, annotation reads). Single training thread owns all
// mutation; tests reset and inspect.
class EventLog {
public:
    static EventLog& instance() {
        static EventLog log;
        return log;
    }

    void bump(const std::string& name, long delta = 1) { counts_[name] += delta; }
    long count(const std::string& name) const {
        auto it = counts_.find(name);
        return it == counts_.end() ? 0 : it->second;
    }
    void reset() { counts_.clear(); }

private:
    std::map<std::string, long> counts_;
};

inline void log_event(const std::string& name) { EventLog::instance().bump(name); }

}  // namespace breathnet
