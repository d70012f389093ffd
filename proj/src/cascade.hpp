#pragma once

#include <functional>
#include <optional>
#include <string>

#include "behavior.hpp"

namespace frauddet {

/// The two-threshold pair driving the three-case decision. Scores below t1
/// reject outright, scores above t2 accept outright, everything in between
/// (boundaries included) escalates to the spending-model check.
struct Thresholds {
    double t1 = 25.0;
    double t2 = 75.0;

    void validate() const;
};

enum class CaseLabel { direct_reject, escalate, direct_accept };
enum class Outcome { accept, reject, alarm };

const char* to_string(CaseLabel c);
const char* to_string(Outcome o);

struct Verdict {
    Outcome outcome = Outcome::reject;
    CaseLabel case_label = CaseLabel::direct_reject;
    double auth_score = 0.0;
    std::optional<double> hmm_delta; // present iff the case escalated
};

/// What the escalation hook reports back: the deviation-check numbers plus
/// the fraud flag. Committing the accepted transaction into the spending
/// sequence is the hook's own responsibility.
struct EscalationOutcome {
    bool is_fraud = false;
    double alpha_prev = 0.0;
    double alpha_new = 0.0;
    double delta = 0.0;
};

using EscalationHook = std::function<EscalationOutcome()>;

/// Decision record sufficient to replay the cascade step: inputs, the case
/// taken, the outcome, and the escalation numbers when that path ran.
struct DecisionRecord {
    CaseLabel case_label = CaseLabel::direct_reject;
    Outcome outcome = Outcome::reject;
    double auth_score = 0.0;
    std::optional<double> alpha_prev;
    std::optional<double> alpha_new;
    std::optional<double> delta;
    std::string annotation; // set when the escalation path failed
};

CaseLabel classify(double score, const Thresholds& thresholds);

/// Runs the three-case cascade. Direct cases never invoke the hook; the
/// escalate case invokes it exactly once. Any hook failure raises an alarm
/// rather than accepting — the cascade fails closed.
std::pair<Verdict, DecisionRecord> decide(const AuthScore& score, const Thresholds& thresholds,
                                          const EscalationHook& hook);

} // namespace frauddet
