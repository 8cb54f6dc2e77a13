import { ApiClient } from "./api.js";
import { ValidationApp } from "./app.js";

const token = new URLSearchParams(window.location.search).get("token") ?? "";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const app = new ValidationApp({ api: new ApiClient(token), root });
void app.showLanguagePicker();
