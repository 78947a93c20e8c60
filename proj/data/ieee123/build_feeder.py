"""Writes feeder.json for the modified IEEE 123-bus feeder.

Standard segment, configuration and spot-load data with loads halved.
Bus 150 is the head bus. Regulators and closed switches become plain
segments (switches have zero impedance). Open switches are dropped along
with the buses reachable only through them (151, 251, 350, 451), as is the
unloaded transformer bus 610.
"""

import json
import pathlib

FT_PER_MILE = 5280.0

# Series impedance per configuration, ohm/mile, upper triangle (aa ab ac bb bc cc).
CONFIGS = {
    1: ("abc", [(0.4576, 1.0780), (0.1560, 0.5017), (0.1535, 0.3849), (0.4666, 1.0482), (0.1580, 0.4236), (0.4615, 1.0651)]),
    2: ("abc", [(0.4666, 1.0482), (0.1580, 0.4236), (0.1560, 0.5017), (0.4615, 1.0651), (0.1535, 0.3849), (0.4576, 1.0780)]),
    3: ("abc", [(0.4615, 1.0651), (0.1535, 0.3849), (0.1580, 0.4236), (0.4576, 1.0780), (0.1560, 0.5017), (0.4666, 1.0482)]),
    4: ("abc", [(0.4615, 1.0651), (0.1580, 0.4236), (0.1535, 0.3849), (0.4666, 1.0482), (0.1560, 0.5017), (0.4576, 1.0780)]),
    5: ("abc", [(0.4666, 1.0482), (0.1560, 0.5017), (0.1580, 0.4236), (0.4576, 1.0780), (0.1535, 0.3849), (0.4615, 1.0651)]),
    6: ("abc", [(0.4576, 1.0780), (0.1535, 0.3849), (0.1560, 0.5017), (0.4615, 1.0651), (0.1580, 0.4236), (0.4666, 1.0482)]),
    7: ("ac", [(0.4576, 1.0780), (0.0, 0.0), (0.1535, 0.3849), (0.0, 0.0), (0.0, 0.0), (0.4615, 1.0651)]),
    8: ("ab", [(0.4576, 1.0780), (0.1535, 0.3849), (0.0, 0.0), (0.4615, 1.0651), (0.0, 0.0), (0.0, 0.0)]),
    9: ("a", [(1.3292, 1.3475), (0, 0), (0, 0), (0, 0), (0, 0), (0, 0)]),
    10: ("b", [(0, 0), (0, 0), (0, 0), (1.3292, 1.3475), (0, 0), (0, 0)]),
    11: ("c", [(0, 0), (0, 0), (0, 0), (0, 0), (0, 0), (1.3292, 1.3475)]),
    12: ("abc", [(1.5209, 0.7521), (0.5198, 0.2775), (0.4924, 0.2157), (1.5329, 0.7162), (0.5198, 0.2775), (1.5209, 0.7521)]),
}

# Thermal ratings per phase conductor, amperes.
AMPACITY = {**{c: 530.0 for c in range(1, 9)}, 9: 230.0, 10: 230.0, 11: 230.0, 12: 310.0}

# from, to, length ft, configuration
SEGMENTS = """
1 2 175 10
1 3 250 11
1 7 300 1
3 4 200 11
3 5 325 11
5 6 250 11
7 8 200 1
8 12 225 10
8 9 225 9
8 13 300 1
9 14 425 9
13 34 150 11
13 18 825 2
14 11 250 9
14 10 250 9
15 16 375 11
15 17 350 11
18 19 250 9
18 21 300 2
19 20 325 9
21 22 525 10
21 23 250 2
23 24 550 11
23 25 275 2
25 26 350 7
25 28 200 2
26 27 275 7
26 31 225 11
27 33 500 9
28 29 300 2
29 30 350 2
30 250 200 2
31 32 300 11
34 15 100 11
35 36 650 8
35 40 250 1
36 37 300 9
36 38 250 10
38 39 325 10
40 41 325 11
40 42 250 1
42 43 500 10
42 44 200 1
44 45 200 9
44 47 250 1
45 46 300 9
47 48 150 4
47 49 250 4
49 50 250 4
50 51 250 4
52 53 200 1
53 54 125 1
54 55 275 1
54 57 350 3
55 56 275 1
57 58 250 10
57 60 750 3
58 59 250 10
60 61 550 5
60 62 250 12
62 63 175 12
63 64 350 12
64 65 425 12
65 66 325 12
67 68 200 9
67 72 275 3
67 97 250 3
68 69 275 9
69 70 325 9
70 71 275 9
72 73 275 11
72 76 200 3
73 74 350 11
74 75 400 11
76 77 400 6
76 86 700 3
77 78 100 6
78 79 225 6
78 80 475 6
80 81 475 6
81 82 250 6
81 84 675 11
82 83 250 6
84 85 475 11
86 87 450 6
87 88 175 9
87 89 275 6
89 90 225 10
89 91 225 6
91 92 300 11
91 93 225 6
93 94 275 9
93 95 300 6
95 96 200 10
97 98 275 3
98 99 550 3
99 100 300 3
100 450 800 3
101 102 225 11
101 105 275 3
102 103 325 11
103 104 700 11
105 106 225 10
105 108 325 3
106 107 575 10
108 109 450 9
108 300 1000 3
109 110 300 9
110 111 575 9
110 112 125 9
112 113 525 9
113 114 325 9
135 35 375 4
149 1 400 1
152 52 400 1
160 67 350 6
197 101 250 3
"""

# Closed switches (zero impedance, rated like the feeder trunk).
SWITCHES = [(150, 149), (13, 152), (18, 135), (60, 160), (97, 197)]

# Standard spot loads: bus, phase, kW, kVAr (halved on output).
SPOT_LOADS = """
1 a 40 20
2 b 20 10
4 c 40 20
5 c 20 10
6 c 40 20
7 a 20 10
9 a 40 20
10 a 20 10
11 a 40 20
12 b 20 10
16 c 40 20
17 c 20 10
19 a 40 20
20 a 40 20
22 b 40 20
24 c 40 20
28 a 40 20
29 a 40 20
30 c 40 20
31 c 20 10
32 c 20 10
33 a 40 20
34 c 40 20
35 a 40 20
37 a 40 20
38 b 20 10
39 b 20 10
41 c 20 10
42 a 20 10
43 b 40 20
45 a 20 10
46 a 20 10
47 a 35 25
47 b 35 25
47 c 35 25
48 a 70 50
48 b 70 50
48 c 70 50
49 a 35 25
49 b 70 50
49 c 35 20
50 c 40 20
51 a 20 10
52 a 40 20
53 a 40 20
55 a 20 10
56 b 20 10
58 b 20 10
59 b 20 10
60 a 20 10
62 c 40 20
63 a 40 20
64 b 75 35
65 a 35 25
65 b 35 25
65 c 70 50
66 c 75 35
68 a 20 10
69 a 40 20
70 a 20 10
71 a 40 20
73 c 40 20
74 c 40 20
75 c 40 20
76 a 105 80
76 b 70 50
76 c 70 50
77 b 40 20
79 a 40 20
80 b 40 20
82 a 40 20
83 c 20 10
84 c 20 10
85 c 40 20
86 b 20 10
87 b 40 20
88 a 40 20
90 b 40 20
92 c 40 20
94 a 40 20
95 b 20 10
96 b 20 10
98 a 40 20
99 b 40 20
100 c 40 20
102 c 20 10
103 c 40 20
104 c 40 20
106 b 40 20
107 b 40 20
109 a 40 20
111 a 20 10
112 a 20 10
113 a 40 20
114 a 20 10
"""

HEAD = 150
LOAD_SCALE = 0.5


def impedance(config, length_ft):
    _, tri = CONFIGS[config]
    scale = length_ft / FT_PER_MILE
    r = [[0.0] * 3 for _ in range(3)]
    x = [[0.0] * 3 for _ in range(3)]
    idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    for (i, j), (ri, xi) in zip(idx, tri):
        r[i][j] = r[j][i] = round(ri * scale, 9)
        x[i][j] = x[j][i] = round(xi * scale, 9)
    return r, x


def main():
    lines = []
    for row in SEGMENTS.split("\n"):
        if row.strip():
            a, b, length, cfg = (int(v) for v in row.split())
            r, x = impedance(cfg, length)
            lines.append({"from": str(a), "to": str(b), "phases": CONFIGS[cfg][0],
                          "r_ohm": r, "x_ohm": x, "ampacity_a": AMPACITY[cfg]})
    zero = [[0.0] * 3 for _ in range(3)]
    for a, b in SWITCHES:
        lines.append({"from": str(a), "to": str(b), "phases": "abc",
                      "r_ohm": zero, "x_ohm": zero, "ampacity_a": AMPACITY[1]})

    labels = {int(l["from"]) for l in lines} | {int(l["to"]) for l in lines}
    phases = {HEAD: "abc"}
    for l in lines:
        phases[int(l["to"])] = l["phases"]

    loads = {}
    for row in SPOT_LOADS.split("\n"):
        if row.strip():
            bus, ph, kw, kvar = row.split()
            p, q = loads.setdefault(int(bus), ([0.0] * 3, [0.0] * 3))
            k = "abc".index(ph)
            p[k] -= float(kw) * LOAD_SCALE
            q[k] -= float(kvar) * LOAD_SCALE

    order = [HEAD] + sorted(labels - {HEAD})
    buses = []
    for index, label in enumerate(order):
        rec = {"index": index, "label": str(label), "phases": phases[label]}
        if label in loads:
            rec["fixed_p_kw"], rec["fixed_q_kvar"] = loads[label]
        buses.append(rec)

    doc = {
        "schema": "gridclear-feeder/1",
        "header": {"s_base_kva": 1000.0, "v_base_kv": 2.401, "v0_pu": 1.03, "v_min_pu": 0.95,
                   "v_max_pu": 1.05, "s0_max_kva": 5000.0},
        "buses": buses,
        "lines": lines,
    }
    out = pathlib.Path(__file__).with_name("feeder.json")
    out.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"{len(buses)} buses, {len(lines)} lines -> {out}")


if __name__ == "__main__":
    main()
