import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qcollusion import svg

NS = "{http://www.w3.org/2000/svg}"


def test_color_scale_endpoints():
    assert svg.color(0.0) == "#440154"
    assert svg.color(1.0) == "#fde725"
    assert svg.color(-3) == svg.color(0.0)
    assert svg.color(float("nan")) == "#dddddd"


def test_heatmap_cells_and_scale():
    z = np.arange(12, dtype=float).reshape(4, 3) / 7.0
    text = svg.heatmap(z, [0, 1, 2, 3], [0.1, 0.2, 0.3], title="t & u")
    root = ET.fromstring(text)
    cells = [e for e in root.iter(f"{NS}rect") if e.get("class") == "cell"]
    assert len(cells) == 12
    assert {float(c.get("data-value")) for c in cells} == set(z.ravel())
    labels = {e.get("class"): e.text for e in root.iter(f"{NS}text") if e.get("class")}
    assert float(labels["vmin"]) == pytest.approx(z.min(), abs=1e-3)
    assert float(labels["vmax"]) == pytest.approx(z.max(), rel=1e-3)
    lo = next(c for c in cells if float(c.get("data-value")) == z.min())
    hi = next(c for c in cells if float(c.get("data-value")) == z.max())
    assert lo.get("fill") == svg.color(0.0) and hi.get("fill") == svg.color(1.0)
    assert "href" not in text and "<image" not in text


def test_heatmap_is_deterministic_and_checks_shape():
    z = np.random.default_rng(0).random((5, 5))
    assert svg.heatmap(z, range(5), range(5)) == svg.heatmap(z.copy(), range(5), range(5))
    with pytest.raises(ValueError):
        svg.heatmap(z, range(4), range(5))


def test_heatmap_handles_missing_and_flat_data():
    z = np.full((2, 2), 0.5)
    z[0, 1] = np.nan
    root = ET.fromstring(svg.heatmap(z, [0, 1], [0, 1]))
    fills = [e.get("fill") for e in root.iter(f"{NS}rect") if e.get("class") == "cell"]
    assert "#dddddd" in fills


def test_curve_series():
    text = svg.curve([("a", [0, 1, 2], [1, 4, 9]), ("b", [0, 2], [3, 3])], title="c")
    root = ET.fromstring(text)
    lines = [e for e in root.iter(f"{NS}polyline") if e.get("class") == "series"]
    assert len(lines) == 2
    assert len(lines[0].get("points").split()) == 3
    assert re.search(r">a<", text) and re.search(r">b<", text)
    with pytest.raises(ValueError):
        svg.curve([])
