#!/usr/bin/env python3
"""Generate the bundled 34-bus feeder fixtures (radial + switchable variant).

Line data follows the published IEEE 34-node test feeder configurations
(ohms/mile, uS/mile); distributed loads are lumped at the far end of their
segment. Writes JSON feeder files plus a manifest with element counts.
"""
import json
import os

MILE_FT = 5280.0
OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "fixtures")

# full 3x3 (a,b,c) series impedance, ohm/mile, and shunt susceptance, uS/mile
CONFIGS = {
    "300": {
        "phases": "abc",
        "z": [[(1.3368, 1.3343), (0.2101, 0.5779), (0.2130, 0.5015)],
              [(0.2101, 0.5779), (1.3238, 1.3569), (0.2066, 0.4591)],
              [(0.2130, 0.5015), (0.2066, 0.4591), (1.3294, 1.3471)]],
        "b": [[5.3350, -1.5313, -0.9943], [-1.5313, 5.0979, -0.6212], [-0.9943, -0.6212, 5.2806]],
    },
    "301": {
        "phases": "abc",
        "z": [[(1.9300, 1.4115), (0.2327, 0.6442), (0.2359, 0.5691)],
              [(0.2327, 0.6442), (1.9157, 1.4281), (0.2288, 0.5238)],
              [(0.2359, 0.5691), (0.2288, 0.5238), (1.9219, 1.4209)]],
        "b": [[5.1207, -1.4364, -0.9402], [-1.4364, 4.9055, -0.5951], [-0.9402, -0.5951, 5.0595]],
    },
    "302": {"phases": "a", "z": [[(2.7995, 1.4855)]], "b": [[4.2251]]},
    "303": {"phases": "b", "z": [[(2.7995, 1.4855)]], "b": [[4.2251]]},
    "304": {"phases": "b", "z": [[(1.9217, 1.4212)]], "b": [[4.3637]]},
}

SEGMENTS = [
    ("800", "802", 2580, "300"), ("802", "806", 1730, "300"), ("806", "808", 32230, "300"),
    ("808", "810", 5804, "303"), ("808", "812", 37500, "300"), ("812", "814", 29730, "300"),
    ("850", "816", 310, "301"), ("816", "818", 1710, "302"), ("816", "824", 10210, "301"),
    ("818", "820", 48150, "302"), ("820", "822", 13740, "302"), ("824", "826", 3030, "303"),
    ("824", "828", 840, "301"), ("828", "830", 20440, "301"), ("830", "854", 520, "301"),
    ("832", "858", 4900, "301"), ("834", "860", 2020, "301"), ("834", "842", 280, "301"),
    ("836", "840", 860, "301"), ("836", "862", 280, "301"), ("842", "844", 1350, "301"),
    ("844", "846", 3640, "301"), ("846", "848", 530, "301"), ("854", "856", 23330, "303"),
    ("854", "852", 36830, "301"), ("858", "864", 1620, "302"), ("858", "834", 5830, "301"),
    ("860", "836", 2680, "301"), ("862", "838", 4860, "304"), ("888", "890", 10560, "300"),
]

# (bus, connection, {phase: (kW, kvar)})
SPOT = [
    ("860", "wye", {"a": (20, 16), "b": (20, 16), "c": (20, 16)}),
    ("840", "wye", {"a": (9, 7), "b": (9, 7), "c": (9, 7)}),
    ("844", "wye", {"a": (135, 105), "b": (135, 105), "c": (135, 105)}),
    ("848", "delta", {"ab": (20, 16), "bc": (20, 16), "ca": (20, 16)}),
    ("890", "delta", {"ab": (150, 75), "bc": (150, 75), "ca": (150, 75)}),
    ("830", "delta", {"ab": (10, 5), "bc": (10, 5), "ca": (25, 10)}),
]
# distributed loads, lumped at the far bus of the segment
DIST = [
    ("806", "wye", {"b": (30, 15), "c": (25, 14)}),
    ("810", "wye", {"b": (16, 8)}),
    ("820", "wye", {"a": (34, 17)}),
    ("822", "wye", {"a": (135, 70)}),
    ("824", "delta", {"bc": (5, 2)}),
    ("826", "wye", {"b": (40, 20)}),
    ("828", "wye", {"c": (4, 2)}),
    ("830", "wye", {"a": (7, 3)}),
    ("856", "wye", {"b": (4, 2)}),
    ("858", "delta", {"ab": (7, 3), "bc": (2, 1), "ca": (6, 3)}),
    ("864", "wye", {"a": (2, 1)}),
    ("834", "delta", {"ab": (4, 2), "bc": (15, 8), "ca": (13, 7)}),
    ("860", "delta", {"ab": (16, 8), "bc": (20, 10), "ca": (110, 55)}),
    ("836", "delta", {"ab": (30, 15), "bc": (10, 6), "ca": (42, 22)}),
    ("840", "delta", {"ab": (18, 9), "bc": (22, 11)}),
    ("838", "wye", {"b": (28, 14)}),
    ("844", "wye", {"a": (9, 5)}),
    ("846", "wye", {"b": (25, 12), "c": (20, 11)}),
    ("848", "wye", {"b": (23, 11)}),
]


def line(fr, to, length_ft, code, bid=None):
    cfg = CONFIGS[code]
    miles = length_ft / MILE_FT
    z = [[[round(r * miles, 9), round(x * miles, 9)] for (r, x) in row] for row in cfg["z"]]
    y = [[[0.0, round(b * 1e-6 * miles, 15)] for b in row] for row in cfg["b"]]
    return {"id": bid or f"L{fr}-{to}", "from": fr, "to": to, "phases": cfg["phases"],
            "kind": "line", "z": z, "y": y}


def diag(values):
    n = len(values)
    return [[list(values[i]) if i == j else [0.0, 0.0] for j in range(n)] for i in range(n)]


def base_feeder():
    three = ["800", "802", "806", "808", "812", "814", "850", "816", "824", "828", "830", "854",
             "852", "832", "858", "834", "842", "844", "846", "848", "860", "836", "840", "862",
             "888", "890"]
    single = {"810": "b", "818": "a", "820": "a", "822": "a", "826": "b", "856": "b",
              "864": "a", "838": "b"}
    buses = []
    for b in three:
        buses.append({"id": b, "phases": "abc", "base_kv": 4.16 if b in ("888", "890") else 24.9})
    for b, ph in single.items():
        buses.append({"id": b, "phases": ph, "base_kv": 24.9})
    buses.sort(key=lambda x: x["id"])

    branches = [line(*s) for s in SEGMENTS]
    step = 0.00625
    branches.append({"id": "REG1", "from": "814", "to": "850", "phases": "abc", "kind": "regulator",
                     "z": diag([(0.001, 0.01)] * 3), "taps": [1 + 4 * step, 1 + 2 * step, 1 + 2 * step]})
    branches.append({"id": "REG2", "from": "852", "to": "832", "phases": "abc", "kind": "regulator",
                     "z": diag([(0.001, 0.01)] * 3), "taps": [1 + 4 * step, 1 + 2 * step, 1 + 2 * step]})
    zb = 4.16 ** 2 / 0.5
    branches.append({"id": "XFM1", "from": "832", "to": "888", "phases": "abc", "kind": "transformer",
                     "z": diag([(round(0.019 * zb, 6), round(0.0408 * zb, 6))] * 3), "taps": [1.0, 1.0, 1.0]})

    loads = []
    for kind, table in (("S", SPOT), ("D", DIST)):
        for bus, conn, pq in table:
            lid = f"{kind}{bus}"
            loads.append({"id": lid, "bus": bus, "connection": conn,
                          "per_phase": [{"phase": p, "p_kw": v[0], "q_kvar": v[1]} for p, v in pq.items()],
                          "meter_group": f"T{lid}"})
    dgs = [
        {"id": "DG816", "bus": "816", "rating_kw": 300.0, "phases": "abc"},
        {"id": "DG836", "bus": "836", "rating_kw": 600.0, "phases": "abc"},
        {"id": "DG890", "bus": "890", "rating_kw": 1000.0, "phases": "abc"},
    ]
    caps = [
        {"id": "C844", "bus": "844", "phases": "abc", "kvar_per_phase": 100.0},
        {"id": "C848", "bus": "848", "phases": "abc", "kvar_per_phase": 150.0},
    ]
    return {
        "name": "ieee34-like",
        "bases": {"kva": 1000.0},
        "source": {"bus": "800", "voltage_pu": 1.0, "angle_deg": 0.0},
        "buses": buses, "branches": branches, "loads": loads, "dgs": dgs, "capacitors": caps,
    }


def switchable_feeder():
    f = base_feeder()
    f["name"] = "ieee34-like-switchable"
    br = [b for b in f["branches"] if b["id"] not in ("L834-842", "L858-834")]
    f["buses"] += [{"id": i, "phases": "abc", "base_kv": 24.9} for i in ("859", "900", "902")]
    f["buses"].sort(key=lambda x: x["id"])
    sw = diag([(1e-4, 0.0)] * 3)
    br.append(line("858", "859", 5830, "301"))
    br += [
        {"id": "CB_1", "from": "834", "to": "842", "phases": "abc", "kind": "switch", "z": sw, "closed": True},
        {"id": "CB_2", "from": "859", "to": "834", "phases": "abc", "kind": "switch", "z": sw, "closed": True},
        line("858", "900", 8000, "301"),
        {"id": "CB_3", "from": "900", "to": "848", "phases": "abc", "kind": "switch", "z": sw, "closed": False},
        line("848", "902", 3000, "301"),
        {"id": "CB_4", "from": "902", "to": "840", "phases": "abc", "kind": "switch", "z": sw, "closed": False},
    ]
    f["branches"] = br
    return f


def manifest(f):
    return {"buses": len(f["buses"]), "branches": len(f["branches"]), "loads": len(f["loads"]),
            "dgs": len(f["dgs"]), "capacitors": len(f["capacitors"]),
            "switches": sum(1 for b in f["branches"] if b["kind"] == "switch"),
            "node_phases": sum(len(b["phases"]) for b in f["buses"])}


if __name__ == "__main__":
    for name, f in (("ieee34", base_feeder()), ("ieee34_switchable", switchable_feeder())):
        with open(os.path.join(OUT, f"{name}.json"), "w") as fh:
            json.dump(f, fh, indent=1)
            fh.write("\n")
        with open(os.path.join(OUT, f"{name}.manifest.json"), "w") as fh:
            json.dump(manifest(f), fh, indent=1)
            fh.write("\n")
        print(name, manifest(f))
