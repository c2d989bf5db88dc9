# Constants for wptcc
from .defaults import *
