#pragma once

#include <stdexcept>
#include <string>

namespace expmem {

/// No grasp hypothesis survived the feasibility filter; the planner should
/// replan (e.g. clear an obstruction) instead of forcing a grasp.
class NoFeasibleGraspError : public std::runtime_error {
public:
    explicit NoFeasibleGraspError(const std::string& what)
        : std::runtime_error(what) {}
};

/// Malformed persisted data (store files, logs, scenario files). Carries the
/// 1-based line number when the format is line-oriented.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                      : what),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_ = 0;
};

/// A remote backend answered outside its contract: zero or multiple tool
/// calls, unknown tool name, missing required field, or an out-of-enum label.
class ProtocolViolation : public std::runtime_error {
public:
    explicit ProtocolViolation(const std::string& what)
        : std::runtime_error(what) {}
};

/// Transport-level or HTTP-level failure talking to a remote backend, after
/// the retry budget was spent.
class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& what, int status, int attempts_made)
        : std::runtime_error(what), status_(status), attempts_(attempts_made) {}
    int status() const { return status_; }
    int attempts_made() const { return attempts_; }

private:
    int status_ = 0;
    int attempts_ = 0;
};

}  // namespace expmem
