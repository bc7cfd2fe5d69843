import { makeChatApi, newSessionId } from "./api.js";
import { createChatApp } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
const app = createChatApp(root, makeChatApi(""), newSessionId());
void app.send("hi");
