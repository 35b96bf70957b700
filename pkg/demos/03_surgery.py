"""Gluing two copies of the DA flow along the excised tube.

Transversality at the boundary compares the stable trace of one side with the
image of the other side's stable trace. The flip gluing sends stable traces to
unstable ones, and in this model those are tangent to the stable trace on the
diagonals of the boundary circle. The quarter turn of the disc avoids that.
"""

from anosov_forge import surgery as sg
from anosov_forge.da_flow import BumpProfile

profile = BumpProfile(0.05)
kappa = profile.delta / 4
field = sg.boundary_line_field(sg.boundary_sample(profile, kappa, 10000))
print(f"traces tangent to the boundary: defect {field.normal_defect():.2g}")
for kind in ("flip", "identity", "quarter_turn"):
    cert, _ = sg.transversality_certificate(field, kind)
    print(f"{kind:12s} theta_min = {cert['theta_min']:.4g} pass = {cert['pass']} "
          f"at (s, u) = ({cert['argmin.s']:.4f}, {cert['argmin.u']:.4f})")

flow = sg.GluedFlow(profile, kappa)
_, rows, log = flow.orbit(sg.GluedChartPoint(sg.W2, 0.013, 0.012, 0.0), 3.0)
for t, name, q in log:
    print(f"t = {t:.4f}: {name} at (s, u) = ({q.s:.5f}, {q.u:.5f})")
