"""Self-check suites behind the ``verify`` CLI command.

Every suite checks the library against an independently derived answer:
a brute-force enumeration, a hand-frozen closed form, or a byte
comparison of serialized state. None of them consult the code under
test for the expected value, so a regression in the library cannot
silently adjust the oracle with it.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from fractions import Fraction

from .context import CostModel, generation_cost, simulate_cache_trace
from .governance import cast_vote, evaluate_promotion, promotion_events, tally
from .report import run_doc
from .sim.engine import run_scenario
from .sim.metrics import TheoremViolation, compare_policies
from .sim.scenario import load_scenario, shipped_scenario_path, shipped_scenarios
from .streams import EVENT_TYPES, StreamGraph
from .values import canonical_bytes
from .wiring import SUBSCRIBES, build_policy_graph, route_event
from .wisdom.phases import Phase
from .wisdom.pipeline import compose_pipeline, run_pipeline, validate_phase_correct
from .wisdom.programs import WisdomProgram
from .wisdom.schema import Schema


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _check(out: list, name: str, ok: bool, detail: str = "") -> None:
    out.append(CheckResult(name=name, ok=bool(ok), detail=detail))


# -- stability -----------------------------------------------------------------


def verify_stability(turns: int = 10_000, seed: int = 99) -> list:
    """Long-trace cache behavior against the closed-form hit rate and cost."""
    out: list = []
    model = CostModel()

    # change interval ten times the turn interval -> predicted hit rate 0.9
    rep = simulate_cache_trace(turns, 0.1, ttl=1e9, model=model, seed=seed)
    hit = float(rep.hit_rate)
    _check(
        out,
        "hit-rate-within-0.02-of-0.9",
        abs(hit - 0.9) <= 0.02,
        f"measured {hit:.4f} over {turns} turns",
    )
    _check(
        out,
        "predicted-hit-rate-exact",
        rep.predicted_hit_rate == Fraction(9, 10),
        f"predicted {rep.predicted_hit_rate}",
    )

    # with nothing ever changing, every warm turn bills exactly the
    # all-hit floor: 0.1*(1000+2000) + 500 with the default block sizes
    expected_steady = Fraction(800)
    rep0 = simulate_cache_trace(turns, 0.0, ttl=1e9, model=model, seed=seed)
    warm_exact = all(r.cost == expected_steady for r in rep0.rows[1:])
    _check(
        out,
        "zero-change-warm-turns-bill-steady-cost",
        warm_exact and rep0.steady_cost == expected_steady,
        f"steady {rep0.steady_cost}, all {turns - 1} warm turns exact",
    )
    _check(
        out,
        "first-turn-is-cold-resume",
        rep.rows[0].cold and rep0.rows[0].cold and not rep.rows[0].session_hit,
        "",
    )
    return out


# -- composition ---------------------------------------------------------------

_TYPE_LITERAL = {
    "integer": "4",
    "decimal": "2.5",
    "string": '"x"',
    "boolean": "true",
    "list": "(list)",
    "record": "(record)",
}

# a type that the key type does NOT flow into (integer->decimal is the
# only permitted widening, so everything here is a genuine break)
_TYPE_BREAK = {
    "integer": "string",
    "decimal": "integer",
    "string": "integer",
    "boolean": "string",
    "list": "record",
    "record": "list",
}

_PRODUCER_PHASES = (Phase.PRE, Phase.CTX, Phase.REL, Phase.POST)
_PRE_AGG_PHASES = (Phase.PRE, Phase.CTX, Phase.REL)

_BASE_FIELD = "base_n"


def _record_source(fields: dict) -> str:
    inner = " ".join(f'"{k}" {_TYPE_LITERAL[t]}' for k, t in sorted(fields.items()))
    return f"(record {inner})" if inner else "(record)"


def _make_program(name, phase, required_in, optional_in, required_out, optional_out, emit):
    return WisdomProgram(
        name=name,
        phase=phase,
        input_schema=Schema(required=dict(required_in), optional=dict(optional_in)),
        output_schema=Schema(required=dict(required_out), optional=dict(optional_out)),
        fitness=0.5,
        source=_record_source(emit),
    )


def _random_library(rng: random.Random) -> dict:
    """A library that is phase-correct by construction.

    Every program requires exactly the base field, producers emit
    globally unique keys, the aggregator declares every pre-agg output
    type-compatibly, and renders mirror the aggregator's output.
    """
    base = {_BASE_FIELD: "integer"}
    n_producers = rng.randint(1, 4)
    producers = []
    key_serial = 0
    agg_optional = {}
    for i in range(n_producers):
        # first producer stays before agg so condition (b) always has work
        phase = _PRE_AGG_PHASES[rng.randrange(3)] if i == 0 else rng.choice(_PRODUCER_PHASES)
        n_keys = 1 if key_serial >= 4 else rng.randint(1, 2)
        req_out, opt_out, emit = {}, {}, {}
        for _ in range(n_keys):
            key = f"k{key_serial}"
            key_serial += 1
            ktype = rng.choice(tuple(_TYPE_LITERAL))
            if rng.random() < 0.25:
                opt_out[key] = ktype
                if rng.random() < 0.5:
                    emit[key] = ktype
            else:
                req_out[key] = ktype
                emit[key] = ktype
            if phase in _PRE_AGG_PHASES:
                declared = ktype
                if ktype == "integer" and rng.random() < 0.3:
                    declared = "decimal"  # exercises the permitted widening
                agg_optional[key] = declared
        producers.append(
            _make_program(f"p{i}", phase, base, {}, req_out, opt_out, emit)
        )
    agg = _make_program(
        "agg", Phase.AGG, base, agg_optional, {"digest": "string"}, {}, {"digest": "string"}
    )
    renders = [
        _make_program(
            f"r{j}",
            Phase.RENDER,
            {"digest": "string"},
            {},
            {f"doc{j}": "string"},
            {},
            {f"doc{j}": "string"},
        )
        for j in range(rng.randint(1, 2))
    ]
    return {"producers": producers, "agg": agg, "renders": renders}


def _break_library(lib: dict, defect: int, rng: random.Random) -> dict:
    """Inject one violation; returns a config validate must reject."""
    producers = list(lib["producers"])
    agg = lib["agg"]
    renders = list(lib["renders"])
    pre_agg = [p for p in producers if p.phase in _PRE_AGG_PHASES]

    if defect == 0:
        # (a): the aggregator requires a field nobody ever provides
        required = dict(agg.input_schema.required)
        required["ghost"] = "integer"
        agg = _make_program(
            "agg", Phase.AGG, required, agg.input_schema.optional,
            agg.output_schema.required, {}, {"digest": "string"},
        )
    elif defect == 1:
        # (b): a pre-agg producer grows an output the aggregator never declared
        victim = pre_agg[rng.randrange(len(pre_agg))]
        req_out = dict(victim.output_schema.required)
        req_out["rogue"] = "string"
        emit = {k: req_out[k] for k in req_out}
        emit.update({k: t for k, t in victim.output_schema.optional.items()})
        replacement = _make_program(
            victim.name, victim.phase, victim.input_schema.required, {},
            req_out, victim.output_schema.optional, emit,
        )
        producers = [replacement if p.name == victim.name else p for p in producers]
    elif defect == 2:
        # (b): type break between a producer output and the agg declaration
        victim = pre_agg[rng.randrange(len(pre_agg))]
        outputs = victim.output_schema.declared()
        key = sorted(outputs)[0]
        optional = dict(agg.input_schema.optional)
        optional[key] = _TYPE_BREAK[outputs[key]]
        agg = _make_program(
            "agg", Phase.AGG, agg.input_schema.required, optional,
            agg.output_schema.required, {}, {"digest": "string"},
        )
    else:
        # (c): render either requires what agg never guarantees, or fails
        # to declare what agg can emit
        if rng.random() < 0.5:
            renders[0] = _make_program(
                renders[0].name, Phase.RENDER,
                {"digest": "string", "ghostdoc": "string"}, {},
                renders[0].output_schema.required, {},
                {k: t for k, t in renders[0].output_schema.required.items()},
            )
        else:
            renders[0] = _make_program(
                renders[0].name, Phase.RENDER, {}, {},
                renders[0].output_schema.required, {},
                {k: t for k, t in renders[0].output_schema.required.items()},
            )
    return {"producers": producers, "agg": agg, "renders": renders}


def verify_composition(count: int = 1000, seed: int = 4242) -> list:
    """Generated libraries: valid ones compose and run clean, mutants reject."""
    out: list = []
    rng = random.Random(seed)
    base_input = {_BASE_FIELD: 7}
    input_before = canonical_bytes(base_input)

    clean = 0
    pristine = 0
    first_failure = ""
    for i in range(count):
        lib = _random_library(rng)
        everyone = lib["producers"] + [lib["agg"]] + lib["renders"]
        try:
            report = validate_phase_correct(lib["producers"], lib["agg"], lib["renders"])
            if report:
                raise AssertionError(f"valid library {i} reported {report[0]}")
            pipeline = compose_pipeline(everyone)
            result = run_pipeline(pipeline, base_input)
            if "digest" not in result.output:
                raise AssertionError(f"library {i}: agg output missing")
        except Exception as exc:  # any schema violation or crash fails the suite
            if not first_failure:
                first_failure = f"library {i}: {exc}"
            continue
        clean += 1
        if canonical_bytes(base_input) == input_before:
            pristine += 1
    _check(
        out,
        "valid-libraries-compose-and-run-clean",
        clean == count,
        first_failure or f"{clean}/{count} composed and ran with zero violations",
    )
    _check(
        out,
        "pipeline-input-bytes-untouched",
        pristine == clean,
        f"{pristine}/{clean} runs left the input serialization byte-identical",
    )

    rejected = 0
    first_miss = ""
    for i in range(count):
        lib = _break_library(_random_library(rng), i % 4, rng)
        report = validate_phase_correct(lib["producers"], lib["agg"], lib["renders"])
        if report:
            rejected += 1
        elif not first_miss:
            first_miss = f"mutant {i} (defect {i % 4}) slipped through"
    _check(
        out,
        "broken-libraries-all-rejected",
        rejected == count,
        first_miss or f"{rejected}/{count} rejected",
    )
    return out


# -- wiring --------------------------------------------------------------------

_WIRE_STREAM_TYPES = {"s0": "goal.doc", "s1": "job", "s2": "chat.main"}
_WIRE_EVENT_TYPES = ("stream.updated", "job.completed", "vote.cast", "message.posted")

_COND_TRUE = "true"
_COND_FALSE = "false"
_COND_FLAG = '(get-or (get input "attributes") "flag" false)'
_COND_N = '(> (get-or (get input "attributes") "n" 0) 2)'
_COND_CRASH = '(get (get input "attributes") "missing")'


def _cond_oracle(source: str, attrs: dict):
    """Independent condition semantics; returns True/False or "error"."""
    if source == _COND_TRUE:
        return True
    if source == _COND_FALSE:
        return False
    if source == _COND_FLAG:
        return attrs.get("flag", False) is True
    if source == _COND_N:
        return attrs.get("n", 0) > 2
    return "error"


def _pattern_oracle(pattern: str, stream_type: str) -> bool:
    if pattern.endswith("*"):
        return stream_type.startswith(pattern[:-1])
    return stream_type == pattern


def _route_and_compare(graph, pg, events, handler_specs, stream_types, folds):
    """Route every event and diff against the brute-force filter.

    handler_specs: hid -> (targets set, pattern, event_type, condition source).
    folds: StreamId -> attrs dict as of that event (caller keeps it current).
    Returns (mismatches, checked) where mismatches is a list of strings.
    """
    problems = []
    for event in events:
        errors: list = []
        got = route_event(pg, event, graph, errors=errors)
        got_ids = [inv.handler_id for inv in got]

        expect = []
        expect_errors = set()
        for hid in sorted(handler_specs):
            targets, pattern, etype, cond = handler_specs[hid]
            if event.stream not in targets:
                continue
            if not _pattern_oracle(pattern, stream_types[event.stream]):
                continue
            if etype != event.event_type:
                continue
            verdict = _cond_oracle(cond, folds[event.stream])
            if verdict == "error":
                expect_errors.add(hid)
            elif verdict:
                expect.append(hid)

        if got_ids != expect:
            problems.append(f"{event.stream} {event.event_type}: got {got_ids}, want {expect}")
        if len(set(got_ids)) != len(got_ids):
            problems.append(f"{event.stream} {event.event_type}: duplicate delivery")
        if {e.handler_id for e in errors} != expect_errors:
            problems.append(
                f"{event.stream} {event.event_type}: errors "
                f"{sorted(e.handler_id for e in errors)}, want {sorted(expect_errors)}"
            )
    return problems


def _exhaustive_wiring() -> tuple:
    """Every handler-config assignment for up to 3 handlers, routed against
    every (stream, event type) pair."""
    configs = []
    for skey in sorted(_WIRE_STREAM_TYPES):
        stype = _WIRE_STREAM_TYPES[skey]
        for pattern in dict.fromkeys((stype, "goal.*")):
            for etype in _WIRE_EVENT_TYPES:
                configs.append((skey, pattern, etype))

    checked = 0
    for n_handlers in range(0, 4):
        for combo in itertools.product(configs, repeat=n_handlers):
            graph = StreamGraph()
            sids = {
                key: graph.create_stream("Sim", stype, {}, name=key)
                for key, stype in _WIRE_STREAM_TYPES.items()
            }
            specs = {}
            for i, (skey, pattern, etype) in enumerate(combo):
                hid = f"h{i}"
                hsid = graph.create_stream(
                    "Safebox",
                    "policy.handler",
                    {"pattern": pattern, "event_type": etype, "condition": _COND_TRUE},
                    name=hid,
                )
                graph.relate(SUBSCRIBES, hsid, sids[skey])
                specs[hid] = ({sids[skey]}, pattern, etype, _COND_TRUE)
            pg = build_policy_graph("Safebox", graph)
            stream_types = {sid: _WIRE_STREAM_TYPES[k] for k, sid in sids.items()}
            folds = {sid: {} for sid in sids.values()}
            events = [
                graph.apply_delta(sids[k], etype, {})
                for k in sorted(sids)
                for etype in _WIRE_EVENT_TYPES
            ]
            problems = _route_and_compare(graph, pg, events, specs, stream_types, folds)
            if problems:
                return checked, problems[0]
            checked += len(events)
    return checked, ""


def _random_wiring(instances: int, seed: int) -> tuple:
    rng = random.Random(seed)
    type_pool = (
        "goal.doc", "goal.job", "job", "chat.main",
        "chat.thread", "vote.tally", "doc.note", "goal.release",
    )
    pattern_pool = ("goal.*", "chat.*", "g*", "*", "job*", "nope")
    cond_pool = (_COND_TRUE, _COND_FALSE, _COND_FLAG, _COND_N, _COND_CRASH)

    checked = 0
    for i in range(instances):
        graph = StreamGraph()
        n_streams = rng.randint(1, 8)
        sids = []
        stream_types = {}
        for s in range(n_streams):
            sid = graph.create_stream("Sim", rng.choice(type_pool), {}, name=f"s{s}")
            sids.append(sid)
            stream_types[sid] = graph.stream(sid).stream_type
        specs = {}
        for h in range(rng.randint(0, 8)):
            hid = f"h{h}"
            targets = set(rng.sample(sids, rng.randint(1, min(3, len(sids)))))
            pattern = (
                rng.choice(pattern_pool)
                if rng.random() < 0.5
                else stream_types[rng.choice(sids)]
            )
            etype = rng.choice(EVENT_TYPES)
            cond = rng.choice(cond_pool)
            hsid = graph.create_stream(
                "Safebox",
                "policy.handler",
                {"pattern": pattern, "event_type": etype, "condition": cond},
                name=hid,
            )
            for target in sorted(targets, key=str):
                graph.relate(SUBSCRIBES, hsid, target)
            specs[hid] = (targets, pattern, etype, cond)
        pg = build_policy_graph("Safebox", graph)

        folds = {sid: {} for sid in sids}
        events = []
        for _ in range(rng.randint(1, 20)):
            sid = rng.choice(sids)
            etype = rng.choice(EVENT_TYPES)
            roll = rng.random()
            if roll < 0.4:
                delta = {}
            elif roll < 0.7:
                delta = {"flag": rng.random() < 0.5}
            else:
                delta = {"n": rng.randint(0, 5)}
            event = graph.apply_delta(sid, etype, delta)
            folds[sid].update(delta)
            # route against the attrs as of this event
            problems = _route_and_compare(
                graph, pg, [event], specs, stream_types, {sid: dict(folds[sid])}
            )
            if problems:
                return checked, f"instance {i}: {problems[0]}"
            events.append(event)
            checked += 1
    return checked, ""


def verify_wiring(random_instances: int = 10_000, seed: int = 777) -> list:
    """Routing against a brute-force subscribed/pattern/type/condition filter."""
    out: list = []
    checked, problem = _exhaustive_wiring()
    _check(
        out,
        "exhaustive-handler-configs-match-brute-force",
        not problem,
        problem or f"{checked} routings agreed, multiplicity 1",
    )
    checked, problem = _random_wiring(random_instances, seed)
    _check(
        out,
        "random-instances-match-brute-force",
        not problem,
        problem or f"{checked} routed events agreed across {random_instances} instances",
    )
    return out


# -- dominance -------------------------------------------------------------------


def verify_dominance(runs: int = 1000) -> list:
    """Turn-count dominance on the gated-background scenario, plus log
    identity when there is nothing for the proactive policy to do."""
    out: list = []
    sc = load_scenario(shipped_scenario_path("background_gated"))
    try:
        rep = compare_policies(sc, runs=runs)
    except TheoremViolation as exc:
        _check(out, "turn-dominance-every-run", False, str(exc))
        return out
    every = all(r.n_p <= r.n_r for r in rep.per_run)
    _check(
        out,
        "turn-dominance-every-run",
        every,
        f"{runs} paired runs, N_P <= N_R in each",
    )
    min_delta = min(r.delta_n for r in rep.per_run)
    _check(
        out,
        "turn-savings-at-least-3",
        min_delta >= 3,
        f"min saved turns {min_delta}, expected {rep.expected_savings}",
    )
    _check(
        out,
        "no-capped-or-stalled-runs",
        not rep.capped_any and not rep.stalled_any,
        "",
    )

    quiet = load_scenario(shipped_scenario_path("user_only"))
    r = run_scenario(quiet, policy="reactive", seed=quiet.seed)
    p = run_scenario(quiet, policy="proactive", seed=quiet.seed)
    r_doc, p_doc = run_doc(r), run_doc(p)
    r_doc.pop("policy"), p_doc.pop("policy")
    same_turns = json.dumps(r_doc, sort_keys=True) == json.dumps(p_doc, sort_keys=True)
    same_graph = r.graph.dump() == p.graph.dump()
    _check(
        out,
        "empty-advancement-set-gives-identical-logs",
        same_turns and same_graph,
        "turn records and full event logs byte-equal across policies",
    )
    return out


# -- coordination ----------------------------------------------------------------


def verify_coordination(runs: int = 3) -> list:
    """Overhead elimination: zero under full coverage, bounded under partial."""
    out: list = []
    full = compare_policies(load_scenario(shipped_scenario_path("full_coverage")), runs=runs)
    _check(
        out,
        "full-coverage-proactive-overhead-zero",
        full.omega_p == 0 and full.omega_r > 0,
        f"omega_R={full.omega_r}, omega_P={full.omega_p}",
    )
    part = compare_policies(load_scenario(shipped_scenario_path("partial_coverage")), runs=runs)
    bound = part.omega_r * (1 - part.c_elim)
    _check(
        out,
        "partial-coverage-bound-exact",
        part.omega_p <= bound and part.omega_bound == bound,
        f"omega_P={part.omega_p} <= {bound} = omega_R*(1-c_elim), c_elim={part.c_elim}",
    )
    gated = compare_policies(load_scenario(shipped_scenario_path("background_gated")), runs=runs)
    _check(
        out,
        "gated-scenario-coordination-eliminated",
        gated.omega_p == 0 and gated.c_elim == 1,
        f"omega_R={gated.omega_r}, omega_P={gated.omega_p}",
    )
    return out


# -- quality ---------------------------------------------------------------------


def verify_quality(runs: int = 3) -> list:
    """Per-run quality dominance on every shipped scenario."""
    out: list = []
    worst = ""
    ok = True
    for name in shipped_scenarios():
        try:
            rep = compare_policies(load_scenario(shipped_scenario_path(name)), runs=runs)
        except TheoremViolation as exc:
            ok = False
            worst = f"{name}: {exc}"
            break
        if not all(r.q_p >= r.q_r for r in rep.per_run):
            ok = False
            worst = f"{name}: a run had Q_P < Q_R"
            break
    _check(out, "quality-dominance-every-scenario", ok, worst or "Q_P >= Q_R on every paired run")

    for name in ("user_only", "threads"):
        rep = compare_policies(load_scenario(shipped_scenario_path(name)), runs=runs)
        exact = all(r.q_p == r.q_r for r in rep.per_run)
        _check(
            out,
            f"identical-pass-content-gives-equal-quality-{name}",
            exact,
            f"Q_P == Q_R exactly in all {runs} runs",
        )
    return out


# -- votes -----------------------------------------------------------------------

_VOTE_WEIGHTS = (1, 0.5, 2, 1.5, 1, 2.5)
_VOTE_THRESHOLD = 5
_VOTE_PLATFORMS = ("telegram", "google", "web")

# hand-computed prefix sums of the weights above
_EXPECTED_TOTALS = {
    1: Fraction(1),
    2: Fraction(3, 2),
    3: Fraction(7, 2),
    4: Fraction(5),
    5: Fraction(6),
    6: Fraction(17, 2),
}


def _vote_leaves(n: int) -> tuple:
    """DFS over every voter order and platform assignment for n votes.

    Prefixes are shared: each tree node copies its parent's graph and
    applies one more cast, so every leaf still experiences the exact
    event sequence of a fresh interleaving while common prefixes are
    computed once. Promotion is attempted after every cast, which is
    what makes exactly-once nontrivial.
    """
    base = StreamGraph()
    sid = base.create_stream(
        "Safebox", "goal.doc", {"threshold": _VOTE_THRESHOLD}, name="ballot"
    )
    should_fire = _EXPECTED_TOTALS[n] >= _VOTE_THRESHOLD
    leaves = 0
    problem = ""

    def descend(graph, remaining, path):
        nonlocal leaves, problem
        if problem:
            return
        if not remaining:
            leaves += 1
            t = tally(graph, sid)
            if t.total_weight != _EXPECTED_TOTALS[n]:
                problem = f"n={n} {path}: tally {t.total_weight}"
                return
            fired = len(promotion_events(graph, sid))
            if fired != (1 if should_fire else 0):
                problem = f"n={n} {path}: {fired} promotion events"
                return
            if t.promotion_fired != should_fire:
                problem = f"n={n} {path}: promotion_fired={t.promotion_fired}"
                return
            recorded = tuple((v.voter, v.platform) for v in t.votes)
            if recorded != tuple(path):
                problem = f"n={n}: recorded {recorded} != cast {path}"
            return
        for i in range(len(remaining)):
            idx = remaining[i]
            rest = remaining[:i] + remaining[i + 1:]
            for platform in _VOTE_PLATFORMS:
                child = graph.copy()
                cast_vote(child, sid, f"v{idx}", _VOTE_WEIGHTS[idx], platform)
                evaluate_promotion(child, sid)
                descend(child, rest, path + ((f"v{idx}", platform),))
                if problem:
                    return

    descend(base, tuple(range(n)), ())
    return leaves, problem


def verify_votes(max_votes: int = 6) -> list:
    """Exhaustive interleavings: order-independent tally, exactly-once firing."""
    out: list = []
    total_leaves = 0
    for n in range(1, max_votes + 1):
        leaves, problem = _vote_leaves(n)
        expected_leaves = 1
        for k in range(n):
            expected_leaves *= (n - k) * len(_VOTE_PLATFORMS)
        fire = "fires once" if _EXPECTED_TOTALS[n] >= _VOTE_THRESHOLD else "never fires"
        _check(
            out,
            f"all-interleavings-{n}-votes",
            not problem and leaves == expected_leaves,
            problem or f"{leaves} interleavings, tally {_EXPECTED_TOTALS[n]}, {fire}",
        )
        total_leaves += leaves
    _check(
        out,
        "interleaving-universe-complete",
        total_leaves == sum(
            _count_interleavings(n) for n in range(1, max_votes + 1)
        ),
        f"{total_leaves} total interleavings checked",
    )
    return out


def _count_interleavings(n: int) -> int:
    total = 1
    for k in range(n, 0, -1):
        total *= k * len(_VOTE_PLATFORMS)
    return total


# -- hierarchy -------------------------------------------------------------------


def verify_hierarchy() -> list:
    """Closed-form generation cost against a node-by-node walk of the tree."""
    out: list = []
    model = CostModel()
    ratio = Fraction(1, 10)  # the default price ratio, written out by hand

    k_pairs = ((0, 0), (10, 0), (7, 3), (0, 5))
    mismatches = ""
    savings_checked = 0
    combos = 0
    for depth in (1, 2, 3):
        for branching in itertools.product((1, 2, 3, 4, 5), repeat=depth):
            leaves = 1
            for b in branching:
                leaves *= b
            if leaves > 20:
                continue
            for ks in itertools.product(k_pairs, repeat=depth):
                combos += 1
                counts = []
                width = 1
                for b in branching:
                    width *= b
                    counts.append(width)
                levels = [
                    (counts[i], ks[i][0], ks[i][1]) for i in range(depth)
                ]
                cached, uncached, savings = generation_cost(levels, model)

                # brute force: every node in the tree billed individually
                walk_cached = Fraction(0)
                walk_uncached = Fraction(0)
                for i in range(depth):
                    k_cached, k_dyn = ks[i]
                    for _node in range(counts[i]):
                        walk_cached += ratio * k_cached + k_dyn
                        walk_uncached += k_cached + k_dyn
                if (cached, uncached) != (walk_cached, walk_uncached):
                    mismatches = (
                        f"branching {branching}, ks {ks}: "
                        f"({cached},{uncached}) != walk ({walk_cached},{walk_uncached})"
                    )
                expected_savings = (
                    walk_uncached / walk_cached if walk_cached > 0 else Fraction(1)
                )
                if savings != expected_savings:
                    mismatches = f"branching {branching}, ks {ks}: savings {savings}"
                if all(kd == 0 for _, kd in ks) and any(kc > 0 for kc, _ in ks):
                    savings_checked += 1
                    if savings != Fraction(10):
                        mismatches = f"branching {branching}, ks {ks}: savings {savings} != 10"
    _check(
        out,
        "closed-form-matches-node-walk",
        not mismatches,
        mismatches or f"{combos} hierarchy shapes agreed",
    )
    _check(
        out,
        "pure-cache-savings-exactly-10x",
        not mismatches and savings_checked > 0,
        f"{savings_checked} all-cached shapes at ratio 0.1",
    )
    return out


# -- registry --------------------------------------------------------------------

SUITES = {
    "stability": verify_stability,
    "composition": verify_composition,
    "wiring": verify_wiring,
    "dominance": verify_dominance,
    "coordination": verify_coordination,
    "quality": verify_quality,
    "votes": verify_votes,
    "hierarchy": verify_hierarchy,
}


def run_suite(name: str) -> list:
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
