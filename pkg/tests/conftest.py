import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from meshes import desk_obj, desk_with_shelf_obj, u_desk_obj  # noqa: E402

from decorkit.geometry import extract_surfaces, load_mesh  # noqa: E402


@pytest.fixture(scope="session")
def desk_surfaces():
    return extract_surfaces(load_mesh(desk_obj()))


@pytest.fixture(scope="session")
def desk_shelf_surfaces():
    return extract_surfaces(load_mesh(desk_with_shelf_obj()))


@pytest.fixture(scope="session")
def u_surface():
    surfaces = extract_surfaces(load_mesh(u_desk_obj()))
    assert len(surfaces) == 1
    return surfaces[0]
