#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vistra {

// Multiply-accumulate instrumentation. Kernels report their MAC counts here;
// the analyzer's closed-form model is validated against these totals. Labels
// form a scope stack so attention internals can be attributed and probed
// (e.g. asserting the K projection runs once per sub-layer).
class MacCounter {
public:
    static MacCounter& instance() {
        static thread_local MacCounter c;
        return c;
    }

    void start() {
        active_ = true;
        total_ = 0;
        by_label_.clear();
        calls_by_label_.clear();
    }
    void stop() { active_ = false; }
    bool active() const { return active_; }

    void add(uint64_t macs) {
        if (!active_) return;
        total_ += macs;
        if (!stack_.empty()) {
            by_label_[stack_.back()] += macs;
            calls_by_label_[stack_.back()] += 1;
        }
    }

    uint64_t total() const { return total_; }
    uint64_t macs_for(const std::string& label) const {
        auto it = by_label_.find(label);
        return it == by_label_.end() ? 0 : it->second;
    }
    uint64_t calls_for(const std::string& label) const {
        auto it = calls_by_label_.find(label);
        return it == calls_by_label_.end() ? 0 : it->second;
    }
    const std::map<std::string, uint64_t>& by_label() const { return by_label_; }

    void push(const std::string& name) {
        stack_.push_back(stack_.empty() ? name : stack_.back() + "." + name);
    }
    void pop() { stack_.pop_back(); }

private:
    bool active_ = false;
    uint64_t total_ = 0;
    std::map<std::string, uint64_t> by_label_;
    std::map<std::string, uint64_t> calls_by_label_;
    std::vector<std::string> stack_;
};

inline void count_macs(uint64_t macs) { MacCounter::instance().add(macs); }

class OpLabel {
public:
    explicit OpLabel(const std::string& name) { MacCounter::instance().push(name); }
    ~OpLabel() { MacCounter::instance().pop(); }
    OpLabel(const OpLabel&) = delete;
    OpLabel& operator=(const OpLabel&) = delete;
};

}  // namespace vistra
