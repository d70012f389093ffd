#include "cascade.hpp"

#include "error.hpp"

namespace frauddet {

void Thresholds::validate() const {
    if (!(0.0 <= t1 && t1 < t2 && t2 <= 100.0))
        fail(Errc::invalid_argument, "thresholds must satisfy 0 <= t1 < t2 <= 100 (got t1=" +
                                         std::to_string(t1) + ", t2=" + std::to_string(t2) + ")");
}

const char* to_string(CaseLabel c) {
    switch (c) {
    case CaseLabel::direct_reject:
        return "direct_reject";
    case CaseLabel::escalate:
        return "escalate";
    case CaseLabel::direct_accept:
        return "direct_accept";
    }
    return "?";
}

const char* to_string(Outcome o) {
    switch (o) {
    case Outcome::accept:
        return "accept";
    case Outcome::reject:
        return "reject";
    case Outcome::alarm:
        return "alarm";
    }
    return "?";
}

CaseLabel classify(double score, const Thresholds& thresholds) {
    thresholds.validate();
    if (score < 0.0 || score > 100.0)
        fail(Errc::invalid_argument, "score " + std::to_string(score) + " outside [0,100]");
    if (score < thresholds.t1)
        return CaseLabel::direct_reject;
    if (score > thresholds.t2)
        return CaseLabel::direct_accept;
    // Boundary equality is unassigned by the strict inequalities of the outer
    // cases; ties route to the middle case.
    return CaseLabel::escalate;
}

std::pair<Verdict, DecisionRecord> decide(const AuthScore& score, const Thresholds& thresholds,
                                          const EscalationHook& hook) {
    if (!hook)
        fail(Errc::invalid_argument, "escalation hook is required");

    DecisionRecord rec;
    rec.auth_score = score.aggregate;
    rec.case_label = classify(score.aggregate, thresholds);

    Verdict verdict;
    verdict.auth_score = score.aggregate;
    verdict.case_label = rec.case_label;

    switch (rec.case_label) {
    case CaseLabel::direct_reject:
        verdict.outcome = Outcome::reject;
        break;
    case CaseLabel::direct_accept:
        verdict.outcome = Outcome::accept;
        break;
    case CaseLabel::escalate:
        try {
            EscalationOutcome esc = hook();
            rec.alpha_prev = esc.alpha_prev;
            rec.alpha_new = esc.alpha_new;
            rec.delta = esc.delta;
            verdict.hmm_delta = esc.delta;
            verdict.outcome = esc.is_fraud ? Outcome::alarm : Outcome::accept;
        } catch (const std::exception& e) {
            verdict.outcome = Outcome::alarm;
            rec.annotation = std::string("escalation failed: ") + e.what();
        }
        break;
    }

    rec.outcome = verdict.outcome;
    return {verdict, rec};
}

} // namespace frauddet
