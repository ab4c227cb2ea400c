"""End-to-end smoke test for the coselect_py extension module.

Builds nothing itself: run `cargo build -p coselect-py` first, then
`python3 python/smoke_test.py`. The script copies the built cdylib into a
temporary directory under an importable name, drives synth -> fit ->
select -> evaluate, and checks that a refit with the same seed reproduces
the model exactly.
"""

import pathlib
import shutil
import sys
import tempfile

import numpy as np

REPO = pathlib.Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libcoselect_py.so", "coselect_py.so", "libcoselect_py.dylib")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("extension not built; run: cargo build -p coselect-py")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    tmp = tempfile.mkdtemp(prefix="coselect_py_")
    shutil.copy2(newest, pathlib.Path(tmp) / "coselect_py.so")
    sys.path.insert(0, tmp)
    import coselect_py

    return coselect_py


def check(name, ok, detail=""):
    mark = "ok" if ok else "FAIL"
    print(f"  {name}: {mark}{' - ' + detail if detail else ''}")
    if not ok:
        sys.exit(1)


def main():
    m = import_extension()
    print(f"imported {m.__name__}")

    ds = m.Dataset.synth(60, [14, 10], 3, 0.4, 11).normalize("zscore")
    check("synth", ds.n_instances == 60 and ds.view_dims == [14, 10])
    view0 = ds.view(0)
    check("view export", view0.shape == (14, 60) and np.isfinite(view0).all())

    rebuilt = m.Dataset([ds.view(0), ds.view(1)], labels=ds.labels)
    check("numpy import", rebuilt.n_views == 2 and rebuilt.labels == ds.labels)

    model = m.fit(ds, seed=11)
    trace = np.array(model.objective_trace)
    check(
        "fit",
        model.converged and np.all(np.diff(trace) <= 1e-6 * np.abs(trace[:-1])),
        f"{model.iterations} iterations, objective {model.objective:.6f}",
    )
    check("weights", np.isclose(model.lambda_.sum(), 1.0) and np.isclose(model.eta.sum(), 1.0))
    check("matrices", model.b().shape == (60, 60) and model.w(0).shape[0] == 14)

    again = m.fit(ds, seed=11)
    check(
        "determinism",
        again.objective == model.objective and np.array_equal(again.b(), model.b()),
    )

    sel = m.select(model, 0.3, 0.2)
    n_feats = sum(len(f) for f in sel.selected_features)
    check(
        "select",
        len(sel.selected_instances) == 12 and n_feats == 8,
        f"{len(sel.selected_instances)} instances, {n_feats} features",
    )

    report = m.evaluate(ds, sel, "one-nn")
    check(
        "evaluate",
        0.0 <= report["acc"] <= 1.0 and 0.0 <= report["f1"] <= 1.0,
        f"acc {report['acc']:.4f}, f1 {report['f1']:.4f}",
    )

    for variant in ("no-graph", "no-consensus"):
        v = m.fit(ds, variant, seed=11)
        check(f"variant {variant}", v.variant == variant and v.iterations >= 1)

    try:
        m.fit(ds, "bogus")
        check("error mapping", False)
    except ValueError as e:
        check("error mapping", "bogus" in str(e))

    print("PASS")


if __name__ == "__main__":
    main()
