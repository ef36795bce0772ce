import pytest

from bellaudit.models import Direction, SettingTable


@pytest.fixture
def table():
    return SettingTable.default()


def xy(deg):
    return Direction.from_angle(deg, "xy")
