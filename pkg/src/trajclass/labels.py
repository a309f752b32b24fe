"""Motion classes and the fixed colour code used on classification maps."""

import enum


class Label(str, enum.Enum):
    BROWNIAN = "Brownian"
    SUBDIFFUSION = "Subdiffusion"
    SUPERDIFFUSION = "Superdiffusion"
    NOT_MOVING = "NotMoving"

    def __str__(self):
        return self.value


LABEL_COLORS = {
    Label.BROWNIAN: "blue",
    Label.SUPERDIFFUSION: "red",
    Label.SUBDIFFUSION: "green",
    Label.NOT_MOVING: "cyan",
}

# Ground-truth hypothesis tags used on labelled benchmark corpora.
HYPOTHESIS_LABEL = {"H0": Label.BROWNIAN, "H1": Label.SUBDIFFUSION, "H2": Label.SUPERDIFFUSION}
