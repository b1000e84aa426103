# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import sys

from motioncompose.cli import main


sys.exit(main())
