"""Early-stopped kernel gradient flow on sin(2 pi x) with two kernels.

Under the Brownian-bridge kernel the target is a single eigenfunction, so a
fixed stopping time already gives the parametric rate 1/n. Under the
min(x, y) kernel its coefficients decay like j^-2, the target sits on the
s = 1.5 boundary and the best stopping time grows like sqrt(n), which gives
the slower n^-0.75.
"""
import os

from featlab.config import load_config
from featlab.experiments import run

here = os.path.dirname(os.path.abspath(__file__))
for name, expected in (("k1", -1.0), ("k2", -0.75)):
    cfg = load_config(os.path.join(here, os.pardir, "configs", f"kernel_curve_{name}.cfg"))
    table = run(cfg)
    print(f"{name}: fitted slope {table.metadata['slope']:.3f} (expected {expected}), "
          f"r2 {table.metadata['r2']:.3f}, {len(cfg.seeds)} seeds")
