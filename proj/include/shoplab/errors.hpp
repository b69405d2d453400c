#pragma once

#include <stdexcept>
#include <string>

namespace shoplab {

// Base for all shoplab exceptions. Data-shaped failures (agent output that
// fails to parse) are returned as values instead, see parsers.hpp.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// --- rubric / model ---

class AllZeroWeightsError : public Error {
public:
    explicit AllZeroWeightsError(const std::string& level)
        : Error("all weights are zero at level: " + level), level(level) {}
    std::string level;
};

class DimensionMissingError : public Error {
public:
    explicit DimensionMissingError(const std::string& name)
        : Error("rubric dimension missing: " + name), name(name) {}
    std::string name;
};

// --- gateway ---

class TransportError : public Error {
public:
    TransportError(const std::string& msg, bool retryable)
        : Error("transport error: " + msg), retryable(retryable) {}
    bool retryable;
};

class ScriptExhaustedError : public Error {
public:
    explicit ScriptExhaustedError(const std::string& msg) : Error("script exhausted: " + msg) {}
};

class MalformedScriptError : public Error {
public:
    MalformedScriptError(const std::string& msg, int line)
        : Error("malformed script (line " + std::to_string(line) + "): " + msg), line(line) {}
    int line;
};

class BudgetExceededError : public Error {
public:
    explicit BudgetExceededError(const std::string& msg) : Error("token budget exceeded: " + msg) {}
};

// --- tool environment ---

class DuplicateProductIdError : public Error {
public:
    DuplicateProductIdError(const std::string& id, int line)
        : Error("duplicate product_id \"" + id + "\" at line " + std::to_string(line)),
          product_id(id), line(line) {}
    std::string product_id;
    int line;
};

class MalformedRecordError : public Error {
public:
    MalformedRecordError(const std::string& msg, int line)
        : Error("malformed record (line " + std::to_string(line) + "): " + msg), line(line) {}
    int line;
};

class BadPriceFilterError : public Error {
public:
    explicit BadPriceFilterError(const std::string& text)
        : Error("bad price filter: \"" + text + "\" (expected \"min-max\" or \"min-\")"), text(text) {}
    std::string text;
};

class EmptyGoalError : public Error {
public:
    EmptyGoalError() : Error("goal is required and must be non-empty") {}
};

class EmptyIdListError : public Error {
public:
    EmptyIdListError() : Error("product id list must be non-empty") {}
};

class EmptyQueryListError : public Error {
public:
    EmptyQueryListError() : Error("query list must be non-empty") {}
};

class EmptyUrlListError : public Error {
public:
    EmptyUrlListError() : Error("url list must be non-empty") {}
};

// --- synthesis ---

class EmptyBehaviorLogError : public Error {
public:
    EmptyBehaviorLogError() : Error("behavior log has no events") {}
};

class MalformedUserAgentReplyError : public Error {
public:
    explicit MalformedUserAgentReplyError(const std::string& msg)
        : Error("malformed user-agent reply: " + msg) {}
};

class MalformedRubricError : public Error {
public:
    explicit MalformedRubricError(const std::string& msg)
        : Error("malformed rubric: " + msg) {}
};

class UnboundPlaceholderError : public Error {
public:
    explicit UnboundPlaceholderError(const std::string& name)
        : Error("unbound template placeholder: {" + name + "}"), name(name) {}
    std::string name;
};

// --- refinement ---

class MalformedInterleavingError : public Error {
public:
    explicit MalformedInterleavingError(int index)
        : Error("supervisor message not flanked by assistant messages at index " +
                std::to_string(index)),
          index(index) {}
    int index;
};

class SupervisorRoleLeakError : public Error {
public:
    explicit SupervisorRoleLeakError(int index)
        : Error("supervisor-role message leaked into refined output at index " +
                std::to_string(index)),
          index(index) {}
    int index;
};

// --- race evaluation ---

class MalformedJudgeReplyError : public Error {
public:
    explicit MalformedJudgeReplyError(const std::string& msg)
        : Error("malformed judge reply: " + msg) {}
};

class MissingCriterionError : public Error {
public:
    explicit MissingCriterionError(const std::string& name)
        : Error("judge reply missing criterion: " + name), name(name) {}
    std::string name;
};

class NegativeScoreError : public Error {
public:
    NegativeScoreError() : Error("intermediate scores must be non-negative") {}
};

class EmptyBatchError : public Error {
public:
    EmptyBatchError() : Error("benchmark batch is empty") {}
};

}  // namespace shoplab
