import random

import pytest

from locrpc.generate import gen_typed, random_type
from locrpc.interp import eval_rpc
from locrpc.syntax import CLIENT, SERVER, App, Lam, Var, alpha_eq, parse
from locrpc.typecheck import (
    INT,
    UNIT_T,
    AApp,
    AConst,
    ALam,
    Arrow,
    AVar,
    GenerationExhausted,
    LocationMismatch,
    OccursCheck,
    ShapeMismatch,
    TypeMismatch,
    UnboundVariable,
    check,
    erase,
    infer,
    loc_eta_expand,
    pretty_ann,
    repair,
    rules_used,
    show_type,
)

S_INT = Arrow(INT, SERVER, INT)
C_INT = Arrow(INT, CLIENT, INT)


def server_id_applied_to_y():
    lam = ALam(SERVER, "z", INT, AVar("z", INT), S_INT)
    return AApp(lam, AVar("y", INT), SERVER, INT)


def test_check_req():
    ann = server_id_applied_to_y()
    assert check({"y": INT}, CLIENT, ann) == INT
    assert rules_used(ann, CLIENT)[0] == "T-Req"


def test_check_lam():
    assert check({}, CLIENT, ALam(SERVER, "z", INT, AVar("z", INT), S_INT)) == S_INT


def test_check_call():
    lam = ALam(CLIENT, "y", INT, AVar("y", INT), C_INT)
    ann = AApp(lam, AConst(0, INT), CLIENT, INT)
    assert check({}, SERVER, ann) == INT
    assert rules_used(ann, SERVER)[0] == "T-Call"


def test_check_rejects_wrong_app_location():
    ann = server_id_applied_to_y()
    bad = AApp(ann.fun, ann.arg, CLIENT, INT)
    with pytest.raises(LocationMismatch):
        check({"y": INT}, CLIENT, bad)


def test_check_rejects_structural_mismatch():
    lam = ALam(SERVER, "z", INT, AVar("z", INT), S_INT)
    with pytest.raises(TypeMismatch):
        check({}, CLIENT, AApp(lam, AConst("s", INT), SERVER, INT))


def test_check_unbound():
    with pytest.raises(UnboundVariable):
        check({}, CLIENT, AVar("nope", INT))


def test_infer_running_example(p0):
    ty, ann = infer(p0, CLIENT)
    assert ty == INT
    assert pretty_ann(ann) == r"(\s f. (\s x. x) @s (f @c 0)) @s (\c y. (\s z. z) @s y)"
    assert ann.fun.param_ty == C_INT
    assert erase(ann) == p0


def test_infer_defaults_residuals():
    ty, _ = infer(parse(r"\c x. x"), CLIENT)
    assert ty == Arrow(UNIT_T, CLIENT, UNIT_T)
    assert show_type(ty) == "Unit ->c Unit"


def test_argument_location_mismatch():
    src = r"(\c p. (\c u. p (\s y. y)) (p (\c x. x))) (\c g. g 1)"
    with pytest.raises(LocationMismatch) as err:
        infer(parse(src), CLIENT)
    assert {err.value.expected, err.value.found} == {CLIENT, SERVER}
    assert "loc_eta_expand" in str(err.value)


def test_cross_location_application_is_fine():
    # an application may always run at its function's location, whatever the ambient side
    assert infer(parse(r"(\c g. g 0) (\s w. w)"), CLIENT)[0] == INT


def test_infer_errors():
    with pytest.raises(UnboundVariable):
        infer(parse("x"), CLIENT)
    with pytest.raises(OccursCheck):
        infer(parse(r"\c x. x x"), CLIENT)
    with pytest.raises(TypeMismatch):
        infer(parse(r"1 2"), CLIENT)


def test_infer_with_env_and_expected():
    ty, ann = infer(parse("f 1"), SERVER, {"f": C_INT})
    assert ty == INT and ann.app_loc is CLIENT
    with pytest.raises(TypeMismatch):
        infer(parse("1"), CLIENT, expected=UNIT_T)


def test_inference_is_sound_on_corpus():
    rng = random.Random(3)
    for seed in range(1500):
        at = rng.choice([CLIENT, SERVER])
        goal = random_type(rng, 2)
        try:
            t = gen_typed(seed, 6, at, goal)
        except GenerationExhausted:
            continue
        ty, ann = infer(t, at)
        assert check({}, at, ann) == ty
        assert erase(ann) == t


def test_eta_identity():
    m = parse(r"\s y. y")
    assert loc_eta_expand(m, S_INT, S_INT) is m


def test_eta_one_level():
    out = loc_eta_expand(parse(r"\s y. y"), S_INT, C_INT)
    assert alpha_eq(out, parse(r"\c x. (\s y. y) x"))


def test_eta_two_levels():
    src = Arrow(C_INT, SERVER, INT)
    dst = Arrow(S_INT, CLIENT, INT)
    out = loc_eta_expand(Var("m"), src, dst)
    assert out == Lam(CLIENT, "x", App(Var("m"), Lam(CLIENT, "x2", App(Var("x"), Var("x2")))))


def test_eta_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        loc_eta_expand(Var("m"), S_INT, Arrow(UNIT_T, CLIENT, INT))


def test_eta_output_types_and_agrees():
    rng = random.Random(11)
    checked = 0
    while checked < 200:
        src = random_type(rng, 2)
        if not isinstance(src, Arrow):
            continue
        dst = flip_locations(src, rng)
        try:
            m = gen_typed(rng.randrange(10**6), 4, CLIENT, src)
            arg = gen_typed(rng.randrange(10**6), 3, CLIENT, src.dom)
        except GenerationExhausted:
            continue
        m = eval_rpc(m, CLIENT)
        out = loc_eta_expand(m, src, dst)
        assert infer(out, CLIENT, expected=dst)[0] == dst
        if not isinstance(src.cod, Arrow):
            fixed_arg = loc_eta_expand(eval_rpc(arg, CLIENT), src.dom, dst.dom)
            assert eval_rpc(App(out, fixed_arg), CLIENT) == eval_rpc(App(m, arg), CLIENT)
        checked += 1


def flip_locations(ty, rng):
    if isinstance(ty, Arrow):
        loc = rng.choice([CLIENT, SERVER])
        return Arrow(flip_locations(ty.dom, rng), loc, flip_locations(ty.cod, rng))
    return ty


def test_repair_fixes_argument_mismatch():
    src = parse(r"(\c p. (\c u. p (\s y. y)) (p (\c x. x))) (\c g. g 1)")
    fixed, log = repair(src, CLIENT)
    assert len(log) == 1
    assert alpha_eq(fixed, parse(r"(\c p. (\c u. p (\s y. y)) (p (\s x. (\c x. x) x))) (\c g. g 1)"))
    assert infer(fixed, CLIENT)[0] == INT
    assert eval_rpc(fixed, CLIENT) == eval_rpc(parse(r"(\c g. g 1) (\c x. x)"), CLIENT)


def test_repair_leaves_typable_terms_alone(p0):
    assert repair(p0, CLIENT) == (p0, [])


def test_rules_used_covers_all_five():
    seen = set()
    for seed in range(400):
        for at in (CLIENT, SERVER):
            _, ann = infer(gen_typed(seed, 6, at), at)
            seen.update(rules_used(ann, at))
    assert {"T-Var", "T-Lam", "T-App", "T-Req", "T-Call"} <= seen
