import logging


# mute numba compilation logs
logging.getLogger("numba").setLevel(logging.WARNING)
logging.getLogger("ergoswitch").setLevel(logging.DEBUG)
