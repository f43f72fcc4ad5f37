"""Phase-correct composition, pipeline execution, and library maintenance."""

import itertools

import pytest
from hypothesis import given, strategies as st

from goalweave.wisdom.phases import Phase
from goalweave.wisdom.pipeline import (
    DuplicateName,
    MergeConflict,
    OutputKeyConflict,
    PhaseCorrectnessViolation,
    PipelineStageError,
    UnknownProgram,
    WisdomLibrary,
    add_program,
    compose_pipeline,
    load_library,
    run_pipeline,
    update_fitness,
    validate_phase_correct,
)
from goalweave.wisdom.programs import WisdomProgram, execute_sandboxed
from goalweave.wisdom.schema import Schema


def make(name, phase, req_in=None, opt_in=None, req_out=None, body="(record)"):
    return WisdomProgram(
        name=name,
        phase=phase,
        input_schema=Schema(required=req_in or {}, optional=opt_in or {}),
        output_schema=Schema(required=req_out or {}, optional={}),
        fitness=0.5,
        source=body,
    )


def small_library():
    """pre produces a, ctx consumes a and produces b, agg digests, render prints."""
    pre = make("pre_a", Phase.PRE, req_out={"a": "integer"}, body='(record "a" 1)')
    ctx = make(
        "ctx_b",
        Phase.CTX,
        req_in={"a": "integer"},
        req_out={"b": "integer"},
        body='(record "b" (+ (get input "a") 1))',
    )
    agg = make(
        "agg",
        Phase.AGG,
        opt_in={"a": "integer", "b": "integer"},
        req_out={"digest": "string"},
        body='(record "digest" (str (get-or input "a" 0) "/" (get-or input "b" 0)))',
    )
    render = make(
        "render",
        Phase.RENDER,
        req_in={"digest": "string"},
        req_out={"doc": "string"},
        body='(record "doc" (str "= " (get input "digest")))',
    )
    return pre, ctx, agg, render


def test_satisfied_library_reports_clean():
    pre, ctx, agg, render = small_library()
    assert validate_phase_correct([pre, ctx], agg, [render]) == []


def test_missing_field_is_a_condition_a_violation():
    pre, ctx, agg, render = small_library()
    needy = make(
        "needy",
        Phase.CTX,
        req_in={"ghost": "integer"},
        req_out={"c": "integer"},
        body='(record "c" 1)',
    )
    report = validate_phase_correct([pre, needy], agg, [render])
    assert any(v.condition == "a" and v.field == "ghost" for v in report)
    # agg must also declare the new output
    assert any(v.condition == "b" and v.field == "c" for v in report)


def test_agg_missing_a_rel_output_is_a_condition_b_violation():
    pre, ctx, agg, render = small_library()
    rel = make("rel_r", Phase.REL, req_out={"r": "integer"}, body='(record "r" 3)')
    report = validate_phase_correct([pre, ctx, rel], agg, [render])
    assert any(v.condition == "b" and v.field == "r" for v in report)


def test_render_requiring_an_unguaranteed_field_is_condition_c():
    pre, ctx, agg, _ = small_library()
    render = make(
        "render",
        Phase.RENDER,
        req_in={"digest": "string", "ghostdoc": "string"},
        req_out={"doc": "string"},
        body='(record "doc" "x")',
    )
    report = validate_phase_correct([pre, ctx], agg, [render])
    assert any(v.condition == "c" and v.field == "ghostdoc" for v in report)


def test_type_narrowing_is_a_violation_but_widening_is_not():
    pre = make("pre_a", Phase.PRE, req_out={"a": "integer"}, body='(record "a" 1)')
    wide = make(
        "wide",
        Phase.CTX,
        req_in={"a": "decimal"},  # integer flows into decimal
        req_out={"b": "integer"},
        body='(record "b" 1)',
    )
    agg = make(
        "agg",
        Phase.AGG,
        opt_in={"a": "integer", "b": "integer"},
        req_out={"digest": "string"},
        body='(record "digest" "d")',
    )
    assert validate_phase_correct([pre, wide], agg, []) == []

    narrow_pre = make("pre_a2", Phase.PRE, req_out={"a": "decimal"}, body='(record "a" 1.5)')
    narrow = make(
        "narrow",
        Phase.CTX,
        req_in={"a": "integer"},
        req_out={"b": "integer"},
        body='(record "b" 1)',
    )
    agg2 = make(
        "agg",
        Phase.AGG,
        opt_in={"a": "decimal", "b": "integer"},
        req_out={"digest": "string"},
        body='(record "digest" "d")',
    )
    report = validate_phase_correct([narrow_pre, narrow], agg2, [])
    assert any(v.condition == "a" and v.field == "a" for v in report)


def test_compose_orders_stages_by_phase():
    p_post = make("p", Phase.POST, req_out={"x": "integer"}, body='(record "x" 1)')
    q_pre = make("q", Phase.PRE, req_out={"y": "integer"}, body='(record "y" 2)')
    pipeline = compose_pipeline([p_post, q_pre])
    assert [stage[0].name for stage in pipeline.stages] == ["q", "p"]


def test_same_phase_disjoint_outputs_form_one_parallel_group():
    a = make("a", Phase.CTX, req_out={"a": "integer"}, body='(record "a" 1)')
    b = make("b", Phase.CTX, req_out={"b": "integer"}, body='(record "b" 2)')
    pipeline = compose_pipeline([b, a])
    assert len(pipeline.stages) == 1
    assert [p.name for p in pipeline.stages[0]] == ["a", "b"]


def test_output_key_conflict_names_both_programs():
    a = make("a", Phase.CTX, req_out={"k": "integer"}, body='(record "k" 1)')
    b = make("b", Phase.CTX, req_out={"k": "integer"}, body='(record "k" 2)')
    with pytest.raises(OutputKeyConflict) as err:
        compose_pipeline([a, b])
    assert "a" in str(err.value) and "b" in str(err.value) and "k" in str(err.value)


def test_two_stage_fold_hand_checked():
    pre = make("pre", Phase.PRE, req_out={"a": "integer"}, body='(record "a" 1)')
    ctx = make(
        "ctx",
        Phase.CTX,
        req_in={"a": "integer"},
        req_out={"b": "integer"},
        body='(record "b" (+ (get input "a") 1))',
    )
    result = run_pipeline(compose_pipeline([pre, ctx]), {})
    assert dict(result.output) == {"a": 1, "b": 2}


def test_single_stage_pipeline_equals_direct_execution():
    p = make(
        "p",
        Phase.PRE,
        req_in={"x": "integer"},
        req_out={"y": "integer"},
        body='(record "y" (* (get input "x") 2))',
    )
    via_pipeline = run_pipeline(compose_pipeline([p]), {"x": 4})
    direct = execute_sandboxed(p, {"x": 4})
    assert via_pipeline.output["y"] == direct.output["y"]
    assert via_pipeline.proposals == direct.proposals


def test_differing_reemission_is_a_merge_conflict():
    pre = make("pre", Phase.PRE, req_out={"a": "integer"}, body='(record "a" 1)')
    clobber = make("clobber", Phase.CTX, req_out={"a": "integer"}, body='(record "a" 2)')
    with pytest.raises(MergeConflict):
        run_pipeline(compose_pipeline([pre, clobber]), {})


def test_equal_reemission_is_permitted():
    pre = make("pre", Phase.PRE, req_out={"a": "integer"}, body='(record "a" 1)')
    echo = make("echo", Phase.CTX, req_out={"a": "integer"}, body='(record "a" 1)')
    result = run_pipeline(compose_pipeline([pre, echo]), {})
    assert result.output["a"] == 1


def test_stage_errors_carry_the_stage_index():
    pre = make("pre", Phase.PRE, req_out={"a": "integer"}, body='(record "a" 1)')
    boom = make("boom", Phase.CTX, req_out={"b": "integer"}, body='(get (record) "gone")')
    with pytest.raises(PipelineStageError) as err:
        run_pipeline(compose_pipeline([pre, boom]), {})
    assert err.value.stage_index == 1
    assert err.value.program == "boom"


def test_proposals_concatenate_in_stage_order():
    pre = make(
        "pre",
        Phase.PRE,
        req_out={"a": "boolean"},
        body='(record "a" (propose "first" 1))',
    )
    ctx = make(
        "ctx",
        Phase.CTX,
        req_out={"b": "boolean"},
        body='(record "b" (propose "second" 2))',
    )
    result = run_pipeline(compose_pipeline([pre, ctx]), {})
    assert [p.field for p in result.proposals] == ["first", "second"]


def test_add_program_accepts_satisfied_candidates():
    pre, ctx, agg, render = small_library()
    lib = WisdomLibrary(programs={pre.name: pre, ctx.name: ctx}, agg=agg, renders=(render,))
    candidate = make(
        "extra",
        Phase.CTX,
        req_in={"a": "integer"},
        req_out={"c": "integer"},
        body='(record "c" 9)',
    )
    with pytest.raises(PhaseCorrectnessViolation):
        add_program(lib, candidate)  # agg does not declare c yet

    lib.agg = make(
        "agg",
        Phase.AGG,
        opt_in={"a": "integer", "b": "integer", "c": "integer"},
        req_out={"digest": "string"},
        body='(record "digest" "d")',
    )
    add_program(lib, candidate)
    assert len(lib.programs) == 3


def test_add_program_rejects_duplicates_and_later_phase_needs():
    pre, ctx, agg, render = small_library()
    lib = WisdomLibrary(programs={pre.name: pre, ctx.name: ctx}, agg=agg, renders=(render,))
    with pytest.raises(DuplicateName):
        add_program(lib, make("pre_a", Phase.PRE, req_out={"z": "integer"}))
    # needs a field produced only at post, i.e. after its own phase
    late = make("late", Phase.PRE, req_in={"made_at_post": "integer"}, req_out={})
    with pytest.raises(PhaseCorrectnessViolation):
        add_program(lib, late)


def test_update_fitness_is_the_fixed_ema():
    pre, ctx, agg, render = small_library()
    lib = WisdomLibrary(programs={pre.name: pre, ctx.name: ctx}, agg=agg, renders=(render,))
    lib.programs["pre_a"] = lib.programs["pre_a"].with_fitness(0.5)
    assert update_fitness(lib, "pre_a", True) == pytest.approx(0.55)
    lib.programs["pre_a"] = lib.programs["pre_a"].with_fitness(1.0)
    assert update_fitness(lib, "pre_a", True) == 1.0
    lib.programs["pre_a"] = lib.programs["pre_a"].with_fitness(0.0)
    assert update_fitness(lib, "pre_a", False) == 0.0
    with pytest.raises(UnknownProgram):
        update_fitness(lib, "nobody", True)


def test_shipped_library_manifest_loads_and_runs():
    from importlib import resources

    manifest = resources.files("goalweave").joinpath("scenarios/wisdom/manifest.toml")
    lib = load_library(manifest)
    assert lib.validation_report() == []
    pipeline = compose_pipeline(lib.all_programs())
    result = run_pipeline(pipeline, {"neighborhood": [{"attributes": {"done": True}}]})
    assert result.output["jobs_done"] == 1
    assert "summary" in result.output
    assert "document" in result.output


@given(st.permutations(["m0", "m1", "m2"]))
def test_parallel_group_order_cannot_change_the_merge(order):
    programs = {
        name: make(
            name,
            Phase.CTX,
            req_out={f"k_{name}": "integer"},
            body=f'(record "k_{name}" {i})',
        )
        for i, name in enumerate(["m0", "m1", "m2"])
    }
    pipeline = compose_pipeline([programs[n] for n in order])
    result = run_pipeline(pipeline, {})
    assert dict(result.output) == {"k_m0": 0, "k_m1": 1, "k_m2": 2}


def test_rerun_is_byte_identical():
    from goalweave.values import canonical_bytes

    pre, ctx, agg, render = small_library()
    pipeline = compose_pipeline([pre, ctx, agg, render])
    a = run_pipeline(pipeline, {})
    b = run_pipeline(pipeline, {})
    assert canonical_bytes(dict(a.output)) == canonical_bytes(dict(b.output))
    assert a.proposals == b.proposals
