import numpy as np
from scipy import linalg

from scinc import __version__
from scinc.config import settings
from scinc.oracles.barriers import barrier_logdet

try:
    print(f"scinc {__version__} (log={settings.log}, log_dir={settings.log_dir})")
    print("Comprobando LAPACK...")
    F = barrier_logdet(3)
    z = np.eye(3).reshape(-1, order="F")
    H = F.hessian(z)
    linalg.cho_factor(H)
    print(f"✓ Barrera logdet evaluada: ν={F.nu:g}, ‖∇F‖={np.linalg.norm(F.grad(z)):.6f}")

except Exception as e:
    print(f"✗ Error en la instalación: {str(e)}")
