// Bundle entry: mount the app against the backend that served this page.

import { ApiClient } from "./api";
import { mountApp } from "./main";

const root = document.getElementById("app");
if (!root) throw new Error("index.html must contain <div id=\"app\">");
mountApp(root, new ApiClient(""));
