import numpy as np
import pytest

from stealth_print.data import triangle_gcode
from stealth_print.gcode import Point3, to_toolpath


@pytest.fixture
def origin():
    return Point3(0.0, 0.0, 0.0)


@pytest.fixture(scope="session")
def gcode_corpus() -> str:
    """Program covering every command the parser knows, plus a few it passes through."""
    lines = [
        "; generated corpus",
        "G28",
        "G28 X Y",
        "M104 S235",
        "M109 S235",
        "M106 S50",
        "G92 E0",
        "G1 Z0.2 F1200",
        "",
    ]
    e = 0.0
    for k in range(45):
        x, y = 20.0 + (k % 9) * 3.5, 20.0 + k * 0.4
        e += 0.12345
        lines.append(f"G0 X{x:.2f} Y{y:.2f}")
        lines.append(f"G1 X{x + 25.0:.3f} Y{y:.3f} E{e:.5f} ; hatch {k}")
        if k % 5 == 0:
            lines.append(f"M106 S{(k * 7) % 101}")
        if k % 9 == 0:
            lines.append(f"G1 Z{0.2 + 0.2 * (k // 9 + 1):.1f}")
            lines.append(f";LAYER:{k // 9 + 1}")
        lines.append("M400")
    lines += ["M107", "M997", "M999", "G1 F3000", "G0 X0 Y0"]
    return "\n".join(lines) + "\n"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def triangle_program():
    return triangle_gcode()


@pytest.fixture(scope="session")
def triangle_toolpath(triangle_program):
    return to_toolpath(triangle_program)
