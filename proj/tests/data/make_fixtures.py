#!/usr/bin/env python3
"""Regenerates the fixture files in this directory.

Every file written here is deterministic. Run from any directory:
    python3 tests/data/make_fixtures.py
"""
import json
import math
import os

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))


def path(name):
    return os.path.join(HERE, name)


# ---------------------------------------------------------------- Model A spec
# Published estimates (bp/sqrt(yr)); factor order N1 N2 N3 R1 R2 S1 S2.
A_N = [[188.1, 509.4, -4902.6], [-89.2, 494.2, -1671.5], [46.3, -512.2, 4164.4]]
A_R = [[35.1, 387.9, 3375.6], [-47.0, -454.1, 11125.9]]
A_S = [[46.5, 732.0], [-23.1, 3128.5]]
SHAPE = {"b2": 0.730, "b3": 3.436, "c2": 3.75}
RHO_LOWER = [
    [],
    [-0.05],
    [-0.06, -0.11],
    [0.54, 0.24, -0.08],
    [-0.56, 0.27, 0.17, 0.00],
    [-0.06, -0.03, 0.10, -0.23, 0.01],
    [0.10, 0.01, -0.02, 0.18, -0.09, 0.00],
]


def rho_hat():
    r = np.eye(7)
    for i, row in enumerate(RHO_LOWER):
        for j, v in enumerate(row):
            r[i, j] = r[j, i] = v
    return r


def rho_model():
    # the model holds factors orthogonal within a block
    r = rho_hat()
    for blk in ([0, 1, 2], [3, 4], [5, 6]):
        for i in blk:
            for j in blk:
                if i != j:
                    r[i, j] = 0.0
    return r


def scaled(direction, total, rho):
    d = np.array(direction, dtype=float)
    return d * total / math.sqrt(d @ rho @ d)


def write_spec():
    rho = rho_model()
    sig_i = scaled([0.25, 0, 0, 0.85, 0.45, 0, 0], 135.1, rho)
    sig_j = scaled([0, 0, 0, 0, 0, 63.7, 50.6], 80.7, rho)
    spec = {
        "units": {"amplitudes": "bp/sqrt(yr)", "fx_loadings": "bp/sqrt(yr)", "decays": "1/yr"},
        "dims": {"m_N": 3, "m_R": 2, "m_S": 2},
        "shape": SHAPE,
        "A_N": A_N,
        "A_R": A_R,
        "spread": {"kind": "parametric", "A_S": A_S},
        "sigma_I": {"target": "I", "alpha": [round(x, 10) for x in sig_i]},
        "sigma_J": {"target": "J", "alpha": [round(x, 10) for x in sig_j]},
        "unrestricted_fx": False,
        "rho": rho.tolist(),
    }
    with open(path("model_a_spec.json"), "w") as f:
        json.dump(spec, f, indent=2)
        f.write("\n")
    with open(path("model_a_rho_hat.csv"), "w") as f:
        f.write("# sample factor correlation matrix, Model A, two decimals as published\n")
        for row in rho_hat():
            f.write(",".join("%.2f" % v for v in row) + "\n")


# ---------------------------------------------------------------- initial curves
# Illustrative levels near the end of 2023, decimal p.a.
INIT = [
    (0.25, 0.1165, 0.0600, 0.0150),
    (0.5, 0.1090, 0.0580, 0.0155),
    (1, 0.1000, 0.0540, 0.0165),
    (2, 0.0985, 0.0530, 0.0180),
    (3, 0.1020, 0.0545, 0.0190),
    (5, 0.1070, 0.0560, 0.0200),
    (7, 0.1090, 0.0565, 0.0205),
    (10, 0.1100, 0.0570, 0.0210),
]


def write_init():
    with open(path("model_a_init.csv"), "w") as f:
        f.write("tau,f_nominal,f_real,s_cdi\n")
        for row in INIT:
            f.write("%s,%s,%s,%s\n" % tuple(repr(float(x)) if i else repr(x) for i, x in enumerate(row)))


# ---------------------------------------------------------------- PCA panel
# 155 weekly levels whose 154 changes have a prescribed covariance spectrum (bp^2/yr).
EIG = [362589, 77330, 41972, 26305, 20000, 17000, 14000, 11810]
PILLARS = [0.25, 0.5, 1, 2, 3, 5, 7, 10]


def write_pca():
    rng = np.random.default_rng(20240101)
    rows = 154
    dt = 1.0 / 52.0
    q, _ = np.linalg.qr(np.column_stack([np.ones(rows), rng.standard_normal((rows, 8))]))
    u = q[:, 1:]  # orthonormal and orthogonal to the constant vector
    basis = np.column_stack([np.array(PILLARS) ** k for k in range(8)])
    v, _ = np.linalg.qr(basis / np.linalg.norm(basis, axis=0))
    lam = np.array(EIG) * 1e-8  # decimal^2 per year
    s = np.sqrt(lam * dt * (rows - 1))
    x = u @ np.diag(s) @ v.T
    levels = np.vstack([np.full(8, 0.11), 0.11 + np.cumsum(x, axis=0)])
    start = np.datetime64("2021-01-08")
    with open(path("pca_nominal_panel.csv"), "w") as f:
        f.write("date," + ",".join(str(p) for p in PILLARS) + "\n")
        for i, row in enumerate(levels):
            d = start + np.timedelta64(7 * i, "D")
            f.write(str(d) + "," + ",".join(repr(float(x)) for x in row) + "\n")


# ---------------------------------------------------------------- wedge issuers
NAMES = [
    "Eletrobras", "Eneva", "Energisa Mato Grosso - Distribuidora de Energia", "Cemig Distribuicao", "CTEEP",
    "Sabesp", "Energisa", "BRK AMBIENTAL", "CCR", "Algar Telecom", "Coelce", "Taesa", "Coelba",
    "Copel Geracao e Transmissao", "AES Tiete Energia",
]
MEAN = [-629.6, -660.2, -625.5, -604.8, -663.8, -647.2, -637.8, -693.7, -643.5, -625.2, -607.5, -663.1, -665.1,
        -642.1, -596.8]
MEDIAN = [-632.6, -659.0, -629.4, -601.9, -668.6, -641.7, -637.6, -692.4, -635.4, -627.7, -606.8, -654.2, -667.1,
          -648.2, -594.3]
STD = [61.8, 53.8, 72.8, 74.7, 63.0, 68.3, 68.7, 49.5, 73.1, 65.2, 59.3, 88.0, 47.8, 70.8, 61.8]
NOBS = [1270, 1270, 1210, 1207, 1190, 1190, 1149, 1141, 1022, 1003, 961, 943, 943, 898, 815]
DUR = [3.7, 4.6, 3.4, 3.1, 4.4, 3.8, 3.8, 4.9, 3.7, 3.9, 2.4, 4.3, 4.2, 4.1, 3.2]
TAU = [-731, -749, -724, -718, -741, -732, -730, -773, -734, -737, -696, -738, -741, -735, -719]
TAU_PF = 0.15


def write_wedge():
    with open(path("wedge_issuers.csv"), "w") as f:
        f.write("# Per-issuer rows of the dual-listed issuer test and the per-issuer decomposition.\n")
        f.write("# mean/median/std/n/duration and the linear tax benchmark are the published values.\n")
        f.write("# f_nominal, s_cdi and the family durations are synthetic; breakeven is solved so that\n")
        f.write("# -breakeven - 0.15 (f_nominal + s_cdi) reproduces the published linear benchmark.\n")
        f.write("issuer,mean_bp,median_bp,std_bp,n_obs,duration,dur_cdi,dur_ipca,f_nominal,breakeven,s_cdi\n")
        for i, name in enumerate(NAMES):
            fn = round(0.1113 + 0.0008 * (DUR[i] - 3.8), 6)
            sc = round(0.0182 + 0.0015 * math.sin(1.7 * i), 6)
            be = -TAU[i] * 1e-4 - TAU_PF * (fn + sc)
            dc = round(DUR[i] - 0.25 + 0.1 * ((i % 3) - 1), 4)
            di = round(2 * DUR[i] - dc, 4)
            f.write("%s,%s,%s,%s,%d,%s,%s,%s,%s,%s,%s\n" % (
                name, MEAN[i], MEDIAN[i], STD[i], NOBS[i], DUR[i], dc, di, repr(fn), repr(be), repr(sc)))


# ---------------------------------------------------------------- OOS report tables
def write_oos():
    with open(path("oos_vol.csv"), "w") as f:
        f.write("# annualized vols of weekly changes, bp/sqrt(yr); ratio_published only where printed\n")
        f.write("variable,tenor,model_bp,realized_bp,ratio_published\n")
        table = {
            "dfN": ([286, 294, 238], [226, 193, 191]),
            "dfR": ([343, 135, 74], [324, 118, 105]),
            "dsCDI": ([81, 52, 42], [115, 47, 43]),
        }
        for var, (m, r) in table.items():
            for t, a, b in zip([1, 3, 5], m, r):
                f.write("%s,%d,%s,%s,\n" % (var, t, a, b))
        f.write("dsCDI_extreme,1,81.1,115.1,1.42\n")
    with open(path("oos_corr.csv"), "w") as f:
        f.write("pair,i,j,in_sample,oos,diff_published\n")
        for p, i, j, a, b, d in [("N1-R1", 0, 3, 0.54, 0.56, 0.02), ("N2-R2", 1, 4, 0.27, 0.28, 0.01),
                                 ("N1-S1", 0, 5, -0.06, 0.03, 0.09), ("S1-S2", 5, 6, 0.00, 0.37, 0.37)]:
            f.write("%s,%d,%d,%.2f,%.2f,%.2f\n" % (p, i, j, a, b, d))
    with open(path("coverage.csv"), "w") as f:
        f.write("# inside counts are the published percentages times n = 110\n")
        f.write("variable,tenor,inside,n,coverage_published_pct\n")
        rows = [("dfN", [1, 3, 5, 7], [104, 108, 102, 100], [94.5, 98.2, 92.7, 90.9]),
                ("dfR", [1, 3, 5, 7], [101, 104, 83, 76], [91.8, 94.5, 75.5, 69.1]),
                ("dsCDI", [1, 3, 5], [94, 102, 100], [85.5, 92.7, 90.9])]
        for var, ts, ins, pct in rows:
            for t, k, p in zip(ts, ins, pct):
                f.write("%s,%d,%d,110,%.1f\n" % (var, t, k, p))


# ---------------------------------------------------------------- synthetic IPCA index
def write_ipca_index():
    rng = np.random.default_rng(7)
    season = [0.0010, 0.0008, 0.0004, 0.0002, -0.0001, -0.0003, -0.0002, 0.0001, 0.0002, 0.0003, 0.0004, 0.0007]
    level = 1000.0
    with open(path("ipca_index_synthetic.csv"), "w") as f:
        f.write("date,index\n")
        for k in range(12 * 12):
            y, m = 2020 + k // 12, k % 12 + 1
            if k:
                level *= math.exp(0.004 + season[m - 1] + 0.0035 * rng.standard_normal())
            f.write("%04d-%02d-01,%s\n" % (y, m, repr(round(level, 8))))


if __name__ == "__main__":
    write_spec()
    write_init()
    write_pca()
    write_wedge()
    write_oos()
    write_ipca_index()
