"""DA deformation of the planar saddle and its cone certificate.

The scan measures the two quantities the hyperbolicity argument needs off the
repelling region: a positive lower bound xi on sigma and the bound c < c_bar.
The cone engine then checks invariance, contraction and eventual expansion on
quasi-random samples and reruns everything at half the integration step.
"""

import math

from anosov_forge.cone_engine import certify_da
from anosov_forge.da_flow import BumpProfile, DADomain, scan_grid

for delta in (0.2, 0.1, 0.05):
    print(f"delta = {delta:4}: c_bar = {BumpProfile(delta).c_bar:.12f}")

dom = DADomain(BumpProfile(0.05))
res = scan_grid(dom, 400)
print(f"s_bar = {dom.s_bar:.10f}, xi = {res.xi:.6f}, max c = {res.c_max:.4f} < c_bar = {res.c_bar:.4f}")

verdict, reports = certify_da(dom, eps=0.3, n_points=4000, n_flow=400)
print(f"verdict: {verdict['verdict']} ({verdict.get('recheck', 'no recheck')})")
for r in reports:
    print(f"  {r.name:20s} pass = {r.ok!s:5s} worst margin = {r.worst_margin:.4g}")

narrow, _ = certify_da(dom, eps=0.3, n_points=4000, n_flow=400, exit_aperture=math.pi / 100)
print(f"with exit aperture pi/100: {narrow['verdict']}, failed checks {narrow['failed']}")
