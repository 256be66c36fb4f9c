/** Browser entry point: boot the console against the serving origin. */

import { ApiClient } from "./api.js";
import { initApp } from "./app.js";

initApp(document, new ApiClient(""));
