"""Bundled benchmark corpus.

Each benchmark is generated as MIR text for a given input size, so the same
program can be produced at oracle scale (a few symbolic bits) and at the
sizes used for comparisons.  `*_assert` variants add end-of-run property
assertions; `guarded_oob` is built so that merging its guard produces an
out-of-bounds false positive; `true_bug` carries a genuine assertion bug.
"""

from __future__ import annotations

import os

from .ir import parse_module

_DIR = os.path.join(os.path.dirname(__file__), "corpus_data")


def _toupper_kernel(n):
    return f"""\
func @to_upper([{n} x i8] %text) -> void {{
entry:
  br %head
head:
  %i = phi i32 [0, %entry], [%inext, %latch]
  %cont = icmp slt i32 %i, {n}
  br %cont, %body, %exit
body:
  %p = gep [{n} x i8] %text, %i
  %c0 = load i8 %p
  %ge = icmp sge i8 %c0, 97
  %le = icmp sle i8 %c0, 122
  %lo = and i1 %ge, %le
  br %lo, %then, %latch
then:
  %t1 = load i8 %p
  %t2 = sub i8 %t1, 97
  %t3 = add i8 %t2, 65
  store i8 %t3, %p
  br %latch
latch:
  %inext = add i32 %i, 1
  br %head
exit:
  ret void
}}
"""


def toupper(n, asserts=False):
    check = ""
    if asserts:
        check = f"""\
  br %ahead
ahead:
  %j = phi i32 [0, %entry], [%jnext, %abody]
  %acont = icmp slt i32 %j, {n}
  br %acont, %abody, %done
abody:
  %ap = gep [{n} x i8] %text, %j
  %av = load i8 %ap
  %age = icmp sge i8 %av, 97
  %ale = icmp sle i8 %av, 122
  %alo = and i1 %age, %ale
  %ok = xor i1 %alo, 1
  call @sym.assert(%ok)
  %jnext = add i32 %j, 1
  br %ahead
done:
"""
    else:
        check = "  br %done\ndone:\n"
    return _toupper_kernel(n) + f"""\
func @main() -> i32 {{
entry:
  %text = alloca [{n} x i8]
  call @sym.make_symbolic(%text, {n}, "text")
  call @to_upper(%text)
{check}  ret i32 0
}}
"""


def _bitonic_network(n):
    pairs = []
    size = 2
    while size <= n:
        stride = size // 2
        while stride > 0:
            for i in range(n):
                l = i ^ stride
                if l > i:
                    pairs.append((i, l, (i & size) == 0))
            stride //= 2
        size *= 2
    return pairs


def bitonic_sort(n, asserts=False):
    assert n & (n - 1) == 0, "bitonic network needs a power of two"
    lines = [f"func @sort([{n} x i8] %a) -> void {{", "entry:"]
    for i in range(n):
        lines.append(f"  %g{i} = gep [{n} x i8] %a, {i}")
    lines.append("  br %ce0")
    pairs = _bitonic_network(n)
    for t, (i, j, asc) in enumerate(pairs):
        nxt = f"ce{t + 1}" if t + 1 < len(pairs) else "fin"
        pred = "sgt" if asc else "slt"
        lines += [
            f"ce{t}:",
            f"  %a{t} = load i8 %g{i}",
            f"  %b{t} = load i8 %g{j}",
            f"  %c{t} = icmp {pred} i8 %a{t}, %b{t}",
            f"  br %c{t}, %swap{t}, %{nxt}",
            f"swap{t}:",
            f"  store i8 %b{t}, %g{i}",
            f"  store i8 %a{t}, %g{j}",
            f"  br %{nxt}",
        ]
    lines += ["fin:", "  ret void", "}", ""]
    check = ""
    if asserts:
        body = []
        for q in range(n - 1):
            body += [
                f"  %x{q} = load i8 %s{q}",
                f"  %y{q} = load i8 %s{q + 1}",
                f"  %ok{q} = icmp sle i8 %x{q}, %y{q}",
                f"  call @sym.assert(%ok{q})",
            ]
        geps = [f"  %s{q} = gep [{n} x i8] %arr, {q}" for q in range(n)]
        check = "\n".join(geps + body) + "\n"
    lines += [
        "func @main() -> i32 {",
        "entry:",
        f"  %arr = alloca [{n} x i8]",
        f'  call @sym.make_symbolic(%arr, {n}, "A")',
        "  call @sort(%arr)",
        check.rstrip("\n") if check else "  br %fin",
    ]
    if not check:
        lines += ["fin:"]
    lines += ["  ret i32 0", "}", ""]
    return "\n".join(lines)


def _triple_loop(name, cells, n, body_lines, store_value_type):
    """k/i/j loop nest around a compare-and-store diamond (shared shape)."""
    return f"""\
func @{name}([{cells} x {store_value_type}] %d) -> void {{
entry:
  br %khead
khead:
  %k = phi i32 [0, %entry], [%knext, %klatch]
  %kc = icmp slt i32 %k, {n}
  br %kc, %ipre, %exit
ipre:
  br %ihead
ihead:
  %i = phi i32 [0, %ipre], [%inext, %ilatch]
  %ic = icmp slt i32 %i, {n}
  br %ic, %jpre, %klatch
jpre:
  br %jhead
jhead:
  %j = phi i32 [0, %jpre], [%jnext, %jlatch]
  %jc = icmp slt i32 %j, {n}
  br %jc, %jbody, %ilatch
jbody:
{body_lines}
jlatch:
  %jnext = add i32 %j, 1
  br %jhead
ilatch:
  %inext = add i32 %i, 1
  br %ihead
klatch:
  %knext = add i32 %k, 1
  br %khead
exit:
  ret void
}}
"""


def transitive_closure(n):
    cells = n * n
    body = f"""\
  %ri = mul i32 %i, {n}
  %ik = add i32 %ri, %k
  %pik = gep [{cells} x i1] %d, %ik
  %vik = load i1 %pik
  %rk = mul i32 %k, {n}
  %kj = add i32 %rk, %j
  %pkj = gep [{cells} x i1] %d, %kj
  %vkj = load i1 %pkj
  %c = and i1 %vik, %vkj
  br %c, %then, %jlatch
then:
  %ij = add i32 %ri, %j
  %pij = gep [{cells} x i1] %d, %ij
  store i1 1, %pij
  br %jlatch"""
    return _triple_loop("closure", cells, n, body, "i1") + f"""\
func @main() -> i32 {{
entry:
  %m = alloca [{cells} x i1]
  call @sym.make_symbolic(%m, {cells}, "adj")
  call @closure(%m)
  ret i32 0
}}
"""


def floyd_warshall(n):
    cells = n * n
    body = f"""\
  %ri = mul i32 %i, {n}
  %ik = add i32 %ri, %k
  %pik = gep [{cells} x i8] %d, %ik
  %dik = load i8 %pik
  %rk = mul i32 %k, {n}
  %kj = add i32 %rk, %j
  %pkj = gep [{cells} x i8] %d, %kj
  %dkj = load i8 %pkj
  %sum = add i8 %dik, %dkj
  %ij = add i32 %ri, %j
  %pij = gep [{cells} x i8] %d, %ij
  %dij = load i8 %pij
  %c = icmp slt i8 %sum, %dij
  br %c, %then, %jlatch
then:
  store i8 %sum, %pij
  br %jlatch"""
    return _triple_loop("relax", cells, n, body, "i8") + f"""\
func @main() -> i32 {{
entry:
  %m = alloca [{cells} x i8]
  call @sym.make_symbolic(%m, {cells}, "w")
  call @relax(%m)
  ret i32 0
}}
"""


def _morph(name, n, combine, asserts, assert_pred):
    cells = n * n
    kernel = f"""\
func @{name}([{cells} x i1] %in, [{cells} x i1] %out) -> void {{
entry:
  br %ihead
ihead:
  %i = phi i32 [0, %entry], [%inext, %ilatch]
  %ic = icmp slt i32 %i, {n}
  br %ic, %jpre, %exit
jpre:
  br %jhead
jhead:
  %j = phi i32 [0, %jpre], [%jnext, %jlatch]
  %jc = icmp slt i32 %j, {n}
  br %jc, %jbody, %ilatch
jbody:
  %row = mul i32 %i, {n}
  %idx = add i32 %row, %j
  %pc = gep [{cells} x i1] %in, %idx
  %vc = load i1 %pc
  %jm1 = sub i32 %j, 1
  %jlok = icmp sge i32 %jm1, 0
  %jl = select i32 %jlok, %jm1, %j
  %il1 = add i32 %row, %jl
  %pl = gep [{cells} x i1] %in, %il1
  %vl = load i1 %pl
  %jp1 = add i32 %j, 1
  %jrok = icmp slt i32 %jp1, {n}
  %jr = select i32 %jrok, %jp1, %j
  %ir1 = add i32 %row, %jr
  %pr = gep [{cells} x i1] %in, %ir1
  %vr = load i1 %pr
  %im1 = sub i32 %i, 1
  %iuok = icmp sge i32 %im1, 0
  %iu = select i32 %iuok, %im1, %i
  %rowu = mul i32 %iu, {n}
  %iu1 = add i32 %rowu, %j
  %pu = gep [{cells} x i1] %in, %iu1
  %vu = load i1 %pu
  %ip1 = add i32 %i, 1
  %idok = icmp slt i32 %ip1, {n}
  %idn = select i32 %idok, %ip1, %i
  %rowd = mul i32 %idn, {n}
  %id1 = add i32 %rowd, %j
  %pd = gep [{cells} x i1] %in, %id1
  %vd = load i1 %pd
  %m1 = {combine} i1 %vc, %vl
  %m2 = {combine} i1 %m1, %vr
  %m3 = {combine} i1 %m2, %vu
  %m = {combine} i1 %m3, %vd
  br %m, %sthen, %jlatch
sthen:
  %po = gep [{cells} x i1] %out, %idx
  store i1 1, %po
  br %jlatch
jlatch:
  %jnext = add i32 %j, 1
  br %jhead
ilatch:
  %inext = add i32 %i, 1
  br %ihead
exit:
  ret void
}}
"""
    if asserts:
        tail = f"""\
  br %ahead
ahead:
  %q = phi i32 [0, %entry], [%qnext, %abody]
  %qc = icmp slt i32 %q, {cells}
  br %qc, %abody, %done
abody:
  %ain = gep [{cells} x i1] %img, %q
  %vi2 = load i1 %ain
  %aout = gep [{cells} x i1] %res, %q
  %vo2 = load i1 %aout
  %ok = icmp {assert_pred} i1 %vo2, %vi2
  call @sym.assert(%ok)
  %qnext = add i32 %q, 1
  br %ahead
done:
  ret i32 0
"""
    else:
        # census pass: a symbolic guard whose arm contains a loop, so it can
        # never be merged away (shape rejection); state merging still applies
        tail = f"""\
  %cnt = alloca [1 x i8]
  br %chead
chead:
  %q = phi i32 [0, %entry], [%qnext, %clatch]
  %qc = icmp slt i32 %q, {cells}
  br %qc, %cbody, %done
cbody:
  %cp = gep [{cells} x i1] %res, %q
  %cv = load i1 %cp
  br %cv, %cthen, %clatch
cthen:
  br %whead
whead:
  %w = phi i32 [0, %cthen], [%wnext, %wbody]
  %wc = icmp slt i32 %w, {n}
  br %wc, %wbody, %cmid
wbody:
  %wp = gep [{cells} x i1] %res, %w
  %wv = load i1 %wp
  %wz = zext i1 %wv to i8
  %cp0 = gep [1 x i8] %cnt, 0
  %old = load i8 %cp0
  %acc = add i8 %old, %wz
  store i8 %acc, %cp0
  %wnext = add i32 %w, 1
  br %whead
cmid:
  br %clatch
clatch:
  %qnext = add i32 %q, 1
  br %chead
done:
  ret i32 0
"""
    return kernel + f"""\
func @main() -> i32 {{
entry:
  %img = alloca [{cells} x i1]
  call @sym.make_symbolic(%img, {cells}, "img")
  %res = alloca [{cells} x i1]
  call @{name}(%img, %res)
{tail}}}
"""


def dilation(n, asserts=False):
    return _morph("dilate", n, "or", asserts, "uge")


def erosion(n, asserts=False):
    return _morph("erode", n, "and", asserts, "ule")


def guarded_oob(n):
    return f"""\
func @main() -> i32 {{
entry:
  %a = alloca [{n} x i8]
  call @sym.make_symbolic(%a, {n}, "A")
  br %head
head:
  %i = phi i32 [0, %entry], [%inext, %latch]
  %cont = icmp slt i32 %i, {n}
  br %cont, %body, %exit
body:
  %p = gep [{n} x i8] %a, %i
  %ch = load i8 %p
  %ip1 = add i32 %i, 1
  %inb = icmp slt i32 %ip1, {n}
  %nz = icmp ne i8 %ch, 0
  %c = and i1 %nz, %inb
  br %c, %then, %latch
then:
  %q = gep [{n} x i8] %a, %ip1
  %nx = load i8 %q
  %t = add i8 %nx, 1
  store i8 %t, %q
  br %latch
latch:
  %inext = add i32 %i, 1
  br %head
exit:
  ret i32 0
}}
"""


def true_bug(_n=1):
    return """\
func @main() -> i32 {
entry:
  %xa = alloca [1 x i8]
  call @sym.make_symbolic(%xa, 1, "x")
  %x = load i8 %xa
  %neg = icmp slt i8 %x, 0
  br %neg, %flip, %join
flip:
  %m = sub i8 0, %x
  br %join
join:
  %y = phi i8 [%m, %flip], [%x, %entry]
  %ne = icmp ne i8 %y, 42
  call @sym.assert(%ne)
  ret i32 0
}
"""


BENCHMARKS = {
    "toupper": (toupper, 10),
    "bitonic_sort": (bitonic_sort, 4),
    "transitive_closure": (transitive_closure, 3),
    "floyd_warshall": (floyd_warshall, 3),
    "dilation": (dilation, 3),
    "erosion": (erosion, 3),
    "guarded_oob": (guarded_oob, 3),
    "true_bug": (true_bug, 1),
    "toupper_assert": (lambda n: toupper(n, asserts=True), 10),
    "bitonic_sort_assert": (lambda n: bitonic_sort(n, asserts=True), 4),
    "dilation_assert": (lambda n: dilation(n, asserts=True), 3),
    "erosion_assert": (lambda n: erosion(n, asserts=True), 3),
}

# sizes whose whole symbolic input space fits exhaustive enumeration
ORACLE_SIZES = {
    "toupper": 2,
    "bitonic_sort": 2,
    "transitive_closure": 3,
    "floyd_warshall": 1,
    "dilation": 2,
    "erosion": 2,
    "guarded_oob": 2,
    "true_bug": 1,
    "toupper_assert": 2,
    "bitonic_sort_assert": 2,
    "dilation_assert": 2,
    "erosion_assert": 2,
}


def names():
    return list(BENCHMARKS)


def source(name, size=None):
    gen, default = BENCHMARKS[name]
    return gen(size if size is not None else default)


def load(name, size=None):
    return parse_module(source(name, size))


def symbolic_objects(mod):
    """(name, width, length) for every make_symbolic in the module."""
    out = []
    for fn in mod.functions:
        for b in fn.blocks:
            for ins in b.instructions:
                if ins.opcode == "make_symbolic":
                    target = ins.operands[0]
                    ty = None
                    for bb in fn.blocks:
                        for d in bb.instructions:
                            if d.id == target.name:
                                ty = d.type
                    if ty is None:
                        ty = dict(fn.params).get(target.name)
                    out.append((ins.operands[2].s, ty.width, ty.length))
    return out


def symbolic_bits(mod):
    return sum(w * l for _, w, l in symbolic_objects(mod))


def write_bundled(directory=_DIR):
    os.makedirs(directory, exist_ok=True)
    for name in BENCHMARKS:
        with open(os.path.join(directory, f"{name}.mir"), "w") as fh:
            fh.write(source(name))


def bundled_path(name):
    return os.path.join(_DIR, f"{name}.mir")
