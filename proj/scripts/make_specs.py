"""Writes the bundled example network specs."""
import json
import pathlib

SPECIES = [
    ("unboundEGFR", 500), ("inactiveSOS", 1200), ("inactiveRas", 1200), ("inactiveRap1", 1200),
    ("boundEGFR", 0), ("activeSOS", 0), ("activeRas", 0), ("activeRap1", 0), ("EGF", 1000),
    ("BRafPP", 0), ("BRaf", 1500), ("activeC3G", 0), ("inactiveC3G", 1200), ("degradedEGFR", 0),
    ("Gap", 2400),
]

# id, reactants, products, enzymes, log10 k, Km
REACTIONS = [
    (1, ["boundEGFR"], ["degradedEGFR"], [], 0.0, None),
    (2, ["EGF", "unboundEGFR"], ["boundEGFR"], [], 1.5, None),
    (3, ["inactiveC3G"], ["activeC3G"], ["boundEGFR"], 0.5, 3386.3875),
    (4, ["activeC3G"], ["inactiveC3G"], [], 2.0, None),
    (5, ["inactiveRap1"], ["activeRap1"], ["activeC3G"], 2.0, 3566.0),
    (6, ["BRaf"], ["BRafPP"], ["activeRap1"], 0.4, 17991.179),
    (7, ["activeRap1"], ["inactiveRap1"], ["Gap"], 1.0, 6808.32),
    (8, ["BRaf"], ["BRafPP"], ["activeRas"], 0.5, 7631.63),
    (9, ["activeRas"], ["inactiveRas"], ["Gap"], 0.0, 12457.816),
    (10, ["inactiveRas"], ["activeRas"], ["activeSOS"], 0.5, 13.73),
    (11, ["activeSOS"], ["inactiveSOS"], [], 4.0, 9834.13),
    (12, ["inactiveSOS"], ["activeSOS"], ["boundEGFR"], 2.5, 8176.56),
]

PRIORS = {
    "example1": {3: (1.1, 0.2), 4: (1.4, 0.2), 5: (2.6, 0.2), 6: (1.0, 0.2), 7: (0.4, 0.2)},
    "example2": {3: (1.2, 0.1), 4: (2.0, 0.1), 5: (2.7, 0.1), 6: (1.1, 0.1), 7: (1.0, 0.01),
                 8: (0.5, 0.1), 9: (0.0, 0.01), 10: (0.5, 0.1), 11: (4.0, 0.01), 12: (2.5, 0.1)},
}


def spec(name):
    priors = PRIORS[name]
    out = {"name": name,
           "species": [{"name": n, "initial_concentration": c, "observed": n == "BRaf"} for n, c in SPECIES],
           "reactions": []}
    for rid, reac, prod, enz, k, km in REACTIONS:
        r = {"id": rid, "reactants": reac, "products": prod, "enzymes": enz,
             "reversible": rid == 2,
             "rate_law": "mass_action" if km is None else "michaelis_menten",
             "base_log10_k": k}
        if rid == 2:
            r["base_log10_k_reverse"] = 0.0
        if km is not None:
            r["michaelis_constant"] = km
        r["fixed"] = rid not in priors
        if rid in priors:
            r["prior"] = {"mean": priors[rid][0], "variance": priors[rid][1]}
        out["reactions"].append(r)
    return out


root = pathlib.Path(__file__).resolve().parent.parent / "data"
for name in PRIORS:
    (root / name / "network.json").write_text(json.dumps(spec(name), indent=2) + "\n")
